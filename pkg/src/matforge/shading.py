"""Differentiable local shading: Cook-Torrance BRDF with a Beckmann NDF,
point lights, and spherical-Gaussian area lights with closed-form products.

Conventions: all directions are unit vectors pointing away from the surface
point; `v` toward the viewer, `l` toward the light. Shading is local (no
shadows or interreflection). Roughness is clamped to MIN_ROUGHNESS inside
shading for optimizer stability near mirror materials.

The SG specular path warps the Beckmann lobe from half-vector space into
light space (axis = reflection of -v, sharpness divided by 4(n.v)) and folds
the Fresnel/shadowing/denominator factors, evaluated at the lobe center, into
the amplitude. Two scalar factors refine the plain lobe/light inner product:
an anisotropy normalization (the exact reflection stretch is 2 in the plane
of incidence and 2(n.v) out of it, so the product with tight lights needs
(lam_iso + lam_l) / sqrt((lam_in + lam_l)(lam_out + lam_l))), and a logistic
hemisphere fraction that removes below-horizon lobe mass. Both are blended
out for broad lobes where they would break error cancellation. All constants
here were pinned against dense spherical quadrature; see the shading tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lights import SGLight
from .materials import MIN_ROUGHNESS, MaterialSample

_SQRT_PI = math.sqrt(math.pi)
_HEMI_K = 2.89   # logistic sharpness: k = lam/sqrt(1 + lam/_HEMI_K)
_BLEND_SCALE = 10.0  # corrections fade in as exp(-(lam_h/_BLEND_SCALE)^2) -> 0


# ---------------------------------------------------------------------------
# scalar cores (numba)

@njit(cache=True, inline="always")
def _beckmann(alpha, cos_h):
    if cos_h <= 0.0:
        return 0.0
    c2 = cos_h * cos_h
    tan2 = (1.0 - c2) / c2
    a2 = alpha * alpha
    return math.exp(-tan2 / a2) / (math.pi * a2 * c2 * c2)


@njit(cache=True, inline="always")
def _beckmann_grad(alpha, cos_h):
    """(D, dD/dalpha)."""
    if cos_h <= 0.0:
        return 0.0, 0.0
    c2 = cos_h * cos_h
    tan2 = (1.0 - c2) / c2
    a2 = alpha * alpha
    d = math.exp(-tan2 / a2) / (math.pi * a2 * c2 * c2)
    return d, d * 2.0 * (tan2 - a2) / (a2 * alpha)


@njit(cache=True, inline="always")
def _smith_lambda(alpha, cos_t):
    if cos_t >= 1.0 - 1e-12:
        return 0.0
    tan_t = math.sqrt(1.0 - cos_t * cos_t) / cos_t
    a = 1.0 / (alpha * tan_t)
    return 0.5 * (math.erf(a) - 1.0) + math.exp(-a * a) / (2.0 * a * _SQRT_PI)


@njit(cache=True, inline="always")
def _smith_lambda_grad(alpha, cos_t):
    """(Lambda, dLambda/dalpha)."""
    if cos_t >= 1.0 - 1e-12:
        return 0.0, 0.0
    tan_t = math.sqrt(1.0 - cos_t * cos_t) / cos_t
    a = 1.0 / (alpha * tan_t)
    lam = 0.5 * (math.erf(a) - 1.0) + math.exp(-a * a) / (2.0 * a * _SQRT_PI)
    dlam = math.exp(-a * a) / (2.0 * _SQRT_PI * a * alpha)
    return lam, dlam


@njit(cache=True, inline="always")
def _g_smith(alpha, nv, nl):
    return 1.0 / (1.0 + _smith_lambda(alpha, nv) + _smith_lambda(alpha, nl))


@njit(cache=True, inline="always")
def _g_smith_grad(alpha, nv, nl):
    """(G, dG/dalpha) for the height-correlated Smith form."""
    lv, dlv = _smith_lambda_grad(alpha, nv)
    ll, dll = _smith_lambda_grad(alpha, nl)
    g = 1.0 / (1.0 + lv + ll)
    return g, -g * g * (dlv + dll)


@njit(cache=True, inline="always")
def _sg_f(lam):
    """(1 - exp(-2 lam)) / lam with the lam -> 0 limit."""
    if lam < 1e-6:
        return 2.0 - 2.0 * lam
    return -math.expm1(-2.0 * lam) / lam


@njit(cache=True, inline="always")
def _sg_product(lam1, lam2, cos_ang):
    """Integral over the sphere of the product of two unit-amplitude SGs."""
    lam_m = math.sqrt(max(lam1 * lam1 + lam2 * lam2 + 2.0 * lam1 * lam2 * cos_ang, 0.0))
    return 2.0 * math.pi * math.exp(lam_m - lam1 - lam2) * _sg_f(lam_m)


@njit(cache=True, inline="always")
def _sg_log_slope(lam):
    """d/dlam of log(e^lam * f(lam)); equals lam/3 near zero."""
    if lam < 1e-4:
        return lam / 3.0
    f = -math.expm1(-2.0 * lam) / lam
    df = (2.0 * math.exp(-2.0 * lam) * lam + math.expm1(-2.0 * lam)) / (lam * lam)
    return 1.0 + df / f


@njit(cache=True, inline="always")
def _irradiance_unit(lam, c):
    """Integral of (n.w)+ times a unit SG with axis at cos angle c from n.

    Taylor expansion in lam below 2 (exact to ~1e-3 there), fitted
    hemispherical form above (~2 percent worst case up to 75 degrees).
    """
    if lam < 2.0:
        s2 = 1.0 - c * c
        i0 = math.pi
        i1 = 2.0 * math.pi / 3.0 * c
        i2 = math.pi / 4.0 * (1.0 + c * c)
        i3 = 2.0 * math.pi / 5.0 * c
        i4 = math.pi * (c * c * c * c / 3.0 + c * c * s2 / 2.0 + s2 * s2 / 8.0)
        i5 = 2.0 * math.pi / 7.0 * c
        acc = (i0 + lam * i1 + lam * lam / 2.0 * i2 + lam ** 3 / 6.0 * i3
               + lam ** 4 / 24.0 * i4 + lam ** 5 / 120.0 * i5)
        return math.exp(-lam) * acc
    c0 = 0.36
    c1 = 1.0 / (4.0 * c0)
    eml = math.exp(-lam)
    em2l = eml * eml
    rl = 1.0 / lam
    scale = 1.0 + 2.0 * em2l - rl
    bias = (eml - em2l) * rl - em2l
    x = math.sqrt(max(1.0 - scale, 1e-12))
    x0 = c0 * c
    x1 = c1 * x
    if abs(x0) <= x1:
        y = (x0 + x1) * (x0 + x1) / x
    else:
        y = min(max(c, 0.0), 1.0)
    return (scale * y + bias) * 2.0 * math.pi * -math.expm1(-2.0 * lam) / lam


@njit(cache=True, inline="always")
def _hemi_fraction(lam, c):
    """Fraction of a unit SG's integral that lies above the horizon."""
    k = lam / math.sqrt(1.0 + lam / _HEMI_K)
    return 1.0 / (1.0 + math.exp(-k * c))


@njit(cache=True)
def shade_core(d, s, alpha, n, v, pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp):
    """Outgoing radiance (r, g, b) at one point; local model, no shadows."""
    out0 = 0.0
    out1 = 0.0
    out2 = 0.0
    nv = n[0] * v[0] + n[1] * v[1] + n[2] * v[2]
    if nv <= 0.0:
        return out0, out1, out2
    ac = alpha if alpha > MIN_ROUGHNESS else MIN_ROUGHNESS

    for k in range(pl_dirs.shape[0]):
        lx = pl_dirs[k, 0]
        ly = pl_dirs[k, 1]
        lz = pl_dirs[k, 2]
        nl = n[0] * lx + n[1] * ly + n[2] * lz
        if nl <= 0.0:
            continue
        hx = v[0] + lx
        hy = v[1] + ly
        hz = v[2] + lz
        hn = math.sqrt(hx * hx + hy * hy + hz * hz)
        spec_base = 0.0
        w = 0.0
        if hn > 1e-12:
            hx /= hn
            hy /= hn
            hz /= hn
            ch = n[0] * hx + n[1] * hy + n[2] * hz
            cd = hx * v[0] + hy * v[1] + hz * v[2]
            dnf = _beckmann(ac, ch)
            g = _g_smith(ac, nv, nl)
            w = (1.0 - cd) ** 5
            spec_base = dnf * g / (4.0 * nl * nv)
        out0 += (d[0] / math.pi + spec_base * (s[0] + (1.0 - s[0]) * w)) * nl * pl_rgb[k, 0]
        out1 += (d[1] / math.pi + spec_base * (s[1] + (1.0 - s[1]) * w)) * nl * pl_rgb[k, 1]
        out2 += (d[2] / math.pi + spec_base * (s[2] + (1.0 - s[2]) * w)) * nl * pl_rgb[k, 2]

    if sg_axes.shape[0] > 0:
        lam_h = 2.0 / (ac * ac)
        lam_w = lam_h / (4.0 * nv)
        rx = 2.0 * nv * n[0] - v[0]
        ry = 2.0 * nv * n[1] - v[1]
        rz = 2.0 * nv * n[2] - v[2]
        d_norm = 1.0 / (math.pi * ac * ac)
        g_c = _g_smith(ac, nv, nv)
        w_c = (1.0 - nv) ** 5
        lam_in = lam_h / 4.0
        lam_out = lam_h / (4.0 * nv * nv)
        blend = 1.0 - math.exp(-(lam_h / _BLEND_SCALE) ** 2)
        m0 = d_norm * g_c / (4.0 * nv)
        for j in range(sg_axes.shape[0]):
            lam_l = sg_sharp[j]
            ca = rx * sg_axes[j, 0] + ry * sg_axes[j, 1] + rz * sg_axes[j, 2]
            sprod = _sg_product(lam_w, lam_l, ca)
            kappa = (lam_w + lam_l) / math.sqrt((lam_in + lam_l) * (lam_out + lam_l))
            ux = lam_w * rx + lam_l * sg_axes[j, 0]
            uy = lam_w * ry + lam_l * sg_axes[j, 1]
            uz = lam_w * rz + lam_l * sg_axes[j, 2]
            lam_m = math.sqrt(ux * ux + uy * uy + uz * uz)
            if lam_m > 1e-12:
                c_m = (n[0] * ux + n[1] * uy + n[2] * uz) / lam_m
                frac = _hemi_fraction(lam_m, c_m)
            else:
                frac = 0.5
            corr = 1.0 + blend * (kappa * frac - 1.0)
            spec_s = m0 * sprod * corr
            cn = n[0] * sg_axes[j, 0] + n[1] * sg_axes[j, 1] + n[2] * sg_axes[j, 2]
            e_unit = _irradiance_unit(lam_l, cn)
            out0 += (d[0] / math.pi * e_unit + spec_s * (s[0] + (1.0 - s[0]) * w_c)) * sg_amp[j, 0]
            out1 += (d[1] / math.pi * e_unit + spec_s * (s[1] + (1.0 - s[1]) * w_c)) * sg_amp[j, 1]
            out2 += (d[2] / math.pi * e_unit + spec_s * (s[2] + (1.0 - s[2]) * w_c)) * sg_amp[j, 2]
    return out0, out1, out2


@njit(cache=True)
def shade_grad_core(d, s, alpha, n, v, pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp):
    """Radiance plus exact partials of the implemented shading expression.

    Returns (r, g, b, dd0, dd1, dd2, ds0, ds1, ds2, dr0, dr1, dr2) where
    dd/ds/dr are d(out_c)/d(diffuse_c), d(out_c)/d(specular_c),
    d(out_c)/d(roughness).
    """
    out0 = out1 = out2 = 0.0
    dd0 = dd1 = dd2 = 0.0
    ds0 = ds1 = ds2 = 0.0
    dr0 = dr1 = dr2 = 0.0
    nv = n[0] * v[0] + n[1] * v[1] + n[2] * v[2]
    if nv <= 0.0:
        return out0, out1, out2, dd0, dd1, dd2, ds0, ds1, ds2, dr0, dr1, dr2
    clamped = alpha <= MIN_ROUGHNESS
    ac = MIN_ROUGHNESS if clamped else alpha
    chain = 0.0 if clamped else 1.0

    for k in range(pl_dirs.shape[0]):
        lx = pl_dirs[k, 0]
        ly = pl_dirs[k, 1]
        lz = pl_dirs[k, 2]
        nl = n[0] * lx + n[1] * ly + n[2] * lz
        if nl <= 0.0:
            continue
        hx = v[0] + lx
        hy = v[1] + ly
        hz = v[2] + lz
        hn = math.sqrt(hx * hx + hy * hy + hz * hz)
        spec_base = 0.0
        dspec_base = 0.0
        w = 0.0
        if hn > 1e-12:
            hx /= hn
            hy /= hn
            hz /= hn
            ch = n[0] * hx + n[1] * hy + n[2] * hz
            cd = hx * v[0] + hy * v[1] + hz * v[2]
            dnf, ddnf = _beckmann_grad(ac, ch)
            g, dg = _g_smith_grad(ac, nv, nl)
            w = (1.0 - cd) ** 5
            denom = 4.0 * nl * nv
            spec_base = dnf * g / denom
            dspec_base = (ddnf * g + dnf * dg) / denom
        for c in range(3):
            sc = s[c]
            fc = sc + (1.0 - sc) * w
            wgt = nl * pl_rgb[k, c]
            contrib = (d[c] / math.pi + spec_base * fc) * wgt
            if c == 0:
                out0 += contrib
                dd0 += wgt / math.pi
                ds0 += spec_base * (1.0 - w) * wgt
                dr0 += dspec_base * fc * wgt * chain
            elif c == 1:
                out1 += contrib
                dd1 += wgt / math.pi
                ds1 += spec_base * (1.0 - w) * wgt
                dr1 += dspec_base * fc * wgt * chain
            else:
                out2 += contrib
                dd2 += wgt / math.pi
                ds2 += spec_base * (1.0 - w) * wgt
                dr2 += dspec_base * fc * wgt * chain

    if sg_axes.shape[0] > 0:
        lam_h = 2.0 / (ac * ac)
        dlam_h = -2.0 * lam_h / ac
        lam_w = lam_h / (4.0 * nv)
        dlam_w = -2.0 * lam_w / ac
        rx = 2.0 * nv * n[0] - v[0]
        ry = 2.0 * nv * n[1] - v[1]
        rz = 2.0 * nv * n[2] - v[2]
        d_norm = 1.0 / (math.pi * ac * ac)
        dd_norm = -2.0 * d_norm / ac
        g_c, dg_c = _g_smith_grad(ac, nv, nv)
        w_c = (1.0 - nv) ** 5
        lam_in = lam_h / 4.0
        lam_out = lam_h / (4.0 * nv * nv)
        eb = math.exp(-(lam_h / _BLEND_SCALE) ** 2)
        blend = 1.0 - eb
        dblend = eb * 2.0 * lam_h / (_BLEND_SCALE * _BLEND_SCALE) * dlam_h
        inv4nv = 1.0 / (4.0 * nv)
        for j in range(sg_axes.shape[0]):
            lam_l = sg_sharp[j]
            ca = rx * sg_axes[j, 0] + ry * sg_axes[j, 1] + rz * sg_axes[j, 2]
            sprod = _sg_product(lam_w, lam_l, ca)
            # dS/dlam_w through lam_m and the -lam_w in the exponent
            lam_m2 = max(lam_w * lam_w + lam_l * lam_l + 2.0 * lam_w * lam_l * ca, 0.0)
            lam_m = math.sqrt(lam_m2)
            if lam_m > 1e-12:
                dlm_dlw = (lam_w + lam_l * ca) / lam_m
            else:
                dlm_dlw = 1.0
            dsprod = sprod * (_sg_log_slope(lam_m) * dlm_dlw - 1.0)
            # anisotropy normalization kappa and its alpha-derivative
            pin = lam_in + lam_l
            pout = lam_out + lam_l
            sq = math.sqrt(pin * pout)
            kappa = (lam_w + lam_l) / sq
            dpin = -2.0 * lam_in / ac
            dpout = -2.0 * lam_out / ac
            dkappa = dlam_w / sq - (lam_w + lam_l) * (dpin * pout + pin * dpout) / (2.0 * sq * sq * sq)
            # hemisphere fraction of the product lobe
            ux = lam_w * rx + lam_l * sg_axes[j, 0]
            uy = lam_w * ry + lam_l * sg_axes[j, 1]
            uz = lam_w * rz + lam_l * sg_axes[j, 2]
            nu = n[0] * ux + n[1] * uy + n[2] * uz
            if lam_m > 1e-12:
                c_m = nu / lam_m
                kk = lam_m / math.sqrt(1.0 + lam_m / _HEMI_K)
                frac = 1.0 / (1.0 + math.exp(-kk * c_m))
                rn = rx * n[0] + ry * n[1] + rz * n[2]
                dcm = (rn - c_m * dlm_dlw) / lam_m
                q = 1.0 + lam_m / _HEMI_K
                dkk = (1.0 + lam_m / (2.0 * _HEMI_K)) / (q * math.sqrt(q))
                dfrac = frac * (1.0 - frac) * (c_m * dkk * dlm_dlw + kk * dcm) * dlam_w
            else:
                frac = 0.5
                dfrac = 0.0
            corr = 1.0 + blend * (kappa * frac - 1.0)
            dcorr = dblend * (kappa * frac - 1.0) + blend * (dkappa * frac + kappa * dfrac)
            base = d_norm * g_c * sprod * corr
            dbase = (dd_norm * g_c * sprod * corr
                     + d_norm * dg_c * sprod * corr
                     + d_norm * g_c * dsprod * dlam_w * corr
                     + d_norm * g_c * sprod * dcorr)
            spec_s = base * inv4nv
            dspec_s = dbase * inv4nv * chain
            cn = n[0] * sg_axes[j, 0] + n[1] * sg_axes[j, 1] + n[2] * sg_axes[j, 2]
            e_unit = _irradiance_unit(lam_l, cn)
            for c in range(3):
                sc = s[c]
                fc = sc + (1.0 - sc) * w_c
                amp = sg_amp[j, c]
                contrib = (d[c] / math.pi * e_unit + spec_s * fc) * amp
                if c == 0:
                    out0 += contrib
                    dd0 += e_unit * amp / math.pi
                    ds0 += spec_s * (1.0 - w_c) * amp
                    dr0 += dspec_s * fc * amp
                elif c == 1:
                    out1 += contrib
                    dd1 += e_unit * amp / math.pi
                    ds1 += spec_s * (1.0 - w_c) * amp
                    dr1 += dspec_s * fc * amp
                else:
                    out2 += contrib
                    dd2 += e_unit * amp / math.pi
                    ds2 += spec_s * (1.0 - w_c) * amp
                    dr2 += dspec_s * fc * amp
    return out0, out1, out2, dd0, dd1, dd2, ds0, ds1, ds2, dr0, dr1, dr2


# ---------------------------------------------------------------------------
# python-facing API

@dataclass(frozen=True)
class ShadingContext:
    """Normal, view direction, and the lights acting on one surface point."""

    n: np.ndarray
    v: np.ndarray
    point_dirs: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    point_rgb: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    sg_axes: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    sg_sharpness: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sg_amplitude: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        for name in ("n", "v", "point_dirs", "point_rgb", "sg_axes",
                     "sg_sharpness", "sg_amplitude"):
            object.__setattr__(self, name,
                               np.ascontiguousarray(getattr(self, name), dtype=np.float64))
        if abs(np.linalg.norm(self.n) - 1.0) > 1e-6 or abs(np.linalg.norm(self.v) - 1.0) > 1e-6:
            raise ValueError("n and v must be unit vectors")
        for k in range(len(self.point_dirs)):
            if abs(np.linalg.norm(self.point_dirs[k]) - 1.0) > 1e-6:
                raise ValueError(f"point light direction {k} is not unit length")
        for k in range(len(self.sg_axes)):
            if abs(np.linalg.norm(self.sg_axes[k]) - 1.0) > 1e-6:
                raise ValueError(f"SG axis {k} is not unit length")

    @classmethod
    def make(cls, n, v, point_lights=(), sg_lights=()) -> "ShadingContext":
        """point_lights: iterable of (direction, rgb); sg_lights: SGLight list."""
        pd = np.asarray([p[0] for p in point_lights], dtype=np.float64).reshape(-1, 3)
        pr = np.asarray([p[1] for p in point_lights], dtype=np.float64).reshape(-1, 3)
        ax = np.asarray([g.axis for g in sg_lights], dtype=np.float64).reshape(-1, 3)
        sh = np.asarray([g.sharpness for g in sg_lights], dtype=np.float64)
        am = np.asarray([g.amplitude for g in sg_lights], dtype=np.float64).reshape(-1, 3)
        return cls(np.asarray(n, dtype=np.float64), np.asarray(v, dtype=np.float64),
                   pd, pr, ax, sh, am)

    def scaled(self, factor: float) -> "ShadingContext":
        """Same lights with all intensities multiplied by factor."""
        return ShadingContext(self.n, self.v, self.point_dirs,
                              self.point_rgb * factor, self.sg_axes,
                              self.sg_sharpness, self.sg_amplitude * factor)


@dataclass(frozen=True)
class ShadeGradient:
    d_diffuse: np.ndarray    # (3, 3), d out_c / d diffuse_c' (diagonal here)
    d_specular: np.ndarray   # (3, 3)
    d_roughness: np.ndarray  # (3,)


def beckmann_ndf(roughness: float, cos_h: float) -> float:
    """Beckmann microfacet distribution D(h); zero below the horizon."""
    if roughness <= 0.0:
        raise ValueError("roughness must be positive")
    return float(_beckmann(float(roughness), float(cos_h)))


def fresnel_schlick(specular, cos_d: float) -> np.ndarray:
    s = np.asarray(specular, dtype=np.float64)
    w = (1.0 - float(cos_d)) ** 5
    return s + (1.0 - s) * w


def eval_brdf(mat: MaterialSample, n, v, l) -> np.ndarray:
    """Cook-Torrance BRDF value (per steradian); zero when v or l is below
    the surface."""
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    nv = float(n @ v)
    nl = float(n @ l)
    if nl <= 0.0 or nv <= 0.0:
        return np.zeros(3)
    ac = max(mat.roughness, MIN_ROUGHNESS)
    h = v + l
    hn = np.linalg.norm(h)
    if hn < 1e-12:
        return mat.diffuse / math.pi
    h = h / hn
    d = _beckmann(ac, float(n @ h))
    g = _g_smith(ac, nv, nl)
    f = fresnel_schlick(mat.specular, float(h @ v))
    return mat.diffuse / math.pi + d * g * f / (4.0 * nl * nv)


def brdf_lobe_as_sg(mat: MaterialSample, n, v) -> SGLight:
    """Specular lobe warped into light space, amplitude folding the NDF
    normalization and the Fresnel/shadowing factors at the lobe center."""
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nv = float(n @ v)
    if nv <= 0.0:
        raise ValueError("brdf_lobe_as_sg requires n.v > 0")
    ac = max(mat.roughness, MIN_ROUGHNESS)
    lam_h = 2.0 / (ac * ac)
    lam_w = lam_h / (4.0 * nv)
    axis = 2.0 * nv * n - v
    d_norm = 1.0 / (math.pi * ac * ac)
    g = _g_smith(ac, nv, nv)
    f = fresnel_schlick(mat.specular, nv)
    blend = 1.0 - math.exp(-(lam_h / _BLEND_SCALE) ** 2)
    frac = _hemi_fraction(lam_w, float(n @ axis))
    corr = 1.0 + blend * (frac - 1.0)
    amp = d_norm * g / (4.0 * nv) * f * corr
    return SGLight(axis=axis, sharpness=lam_w, amplitude=amp)


def sg_inner_product(g1: SGLight, g2: SGLight) -> np.ndarray:
    """Closed-form integral over the sphere of the product of two SG lobes."""
    cos_ang = float(np.dot(g1.axis, g2.axis))
    s = _sg_product(g1.sharpness, g2.sharpness, cos_ang)
    return g1.amplitude * g2.amplitude * s


def sg_irradiance(normal, light: SGLight) -> np.ndarray:
    """Cosine-weighted integral of an SG light over the upper hemisphere."""
    c = float(np.dot(np.asarray(normal, dtype=np.float64), light.axis))
    return light.amplitude * _irradiance_unit(light.sharpness, c)


def shade_point(mat: MaterialSample, ctx: ShadingContext) -> np.ndarray:
    out = shade_core(mat.diffuse, mat.specular, mat.roughness, ctx.n, ctx.v,
                     ctx.point_dirs, ctx.point_rgb,
                     ctx.sg_axes, ctx.sg_sharpness, ctx.sg_amplitude)
    return np.array(out)


def shade_gradients(mat: MaterialSample, ctx: ShadingContext):
    r = shade_grad_core(mat.diffuse, mat.specular, mat.roughness, ctx.n, ctx.v,
                        ctx.point_dirs, ctx.point_rgb,
                        ctx.sg_axes, ctx.sg_sharpness, ctx.sg_amplitude)
    color = np.array(r[0:3])
    grad = ShadeGradient(
        d_diffuse=np.diag(r[3:6]).astype(np.float64),
        d_specular=np.diag(r[6:9]).astype(np.float64),
        d_roughness=np.array(r[9:12]),
    )
    return color, grad
