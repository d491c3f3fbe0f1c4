"""End-to-end orchestration: stats -> predict -> smooth -> bake -> rerender
-> validate, with per-stage artifacts on disk so stages can also run alone.

Artifact layout under the output directory:

    views/<id>/{diffuse,specular,roughness}.pfm   per-view maps (smoothed in
                                                  place by the smooth stage)
    views/<id>/stats_{min,median,max}.pfm         optional statistics dump
    atlas/{diffuse,specular,roughness}.pfm        baked atlas + PNG previews
    atlas/coverage.png
    renders/<id>.pfm                              validation re-renders
    report.json

Everything except the report's wall-clock timings is a pure function of the
config and seed.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atlas import MaterialAtlas, bake_atlas
from .bilateral import SolverParams, smooth_specular_roughness
from .errors import ConfigError, MatforgeError
from .images import RadianceImage, save_image, write_pfm, write_png_preview
from .materials import MaterialMaps, load_material_maps, save_material_maps
from .predict import PredictorConfig, heuristic_predict, optimize_materials
from .render import psnr, rerender
from .scene import SceneDescription, load_scene_config
from .viewstats import build_feature_stacks, compute_view_data, pack_views


class StageError(MatforgeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineReport:
    stage_seconds: dict = field(default_factory=dict)
    per_view_loss: list = field(default_factory=list)
    coverage_fraction: float = 0.0
    psnr_db: list = field(default_factory=list)
    seed: int = 0
    num_views: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _view_dir(out_dir, view_id: int) -> Path:
    d = Path(out_dir) / "views" / f"{view_id:03d}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _predictor_config(scene: SceneDescription, seed: int | None) -> PredictorConfig:
    cfg = dict(scene.predictor_cfg)
    if seed is not None:
        cfg["seed"] = seed
    lights = (tuple(scene.point_lights), tuple(scene.sg_lights))
    if cfg.get("mode", "heuristic") == "optimize" and not (
            scene.point_lights or scene.sg_lights):
        raise MatforgeError("optimize mode requires lights in the scene config")
    return PredictorConfig.from_dict(cfg, lights=lights)


def stage_stats(scene: SceneDescription, out_dir=None, dump: bool = False):
    """Per-view reprojection data and statistics; optionally dumped as PFMs."""
    packed = pack_views(scene)
    datas = [compute_view_data(scene, i, packed=packed)
             for i in range(scene.num_views)]
    if dump and out_dir is not None:
        for i, data in enumerate(datas):
            d = _view_dir(out_dir, i)
            m3 = data.valid[:, :, None]
            write_pfm(d / "stats_min.pfm", np.where(m3, data.stat_min, 0.0))
            write_pfm(d / "stats_median.pfm", np.where(m3, data.stat_median, 0.0))
            write_pfm(d / "stats_max.pfm", np.where(m3, data.stat_max, 0.0))
    return packed, datas


def solver_confidence(data) -> np.ndarray:
    """Highlight-evidence confidence for the bilateral solver.

    Stands in for the paper's learned confidence: pixels whose observations
    swing strongly across views carry real specular information and anchor
    the solve; the rest get a small floor so the smoothing can propagate
    into them.
    """
    spread = np.clip(data.stat_max - data.stat_min, 0.0, None) @ np.array(
        [0.2126, 0.7152, 0.0722])
    conf = np.clip(spread / 0.15, 0.05, 1.0)
    return np.where(data.valid, conf, 0.0)


def stage_predict(scene: SceneDescription, datas, out_dir,
                  seed: int | None = None):
    """Predict per-view maps and write the PFM triples plus the solver
    confidence raster."""
    cfg = _predictor_config(scene, seed)
    maps_list = []
    losses = []
    for i, data in enumerate(datas):
        stacks = build_feature_stacks(scene, i, data=data)
        maps = heuristic_predict(stacks)
        if cfg.mode == "optimize":
            maps, loss_map, _ = optimize_materials(data, cfg.light_model, maps,
                                                   cfg, scene)
            valid_losses = loss_map[maps.mask & np.isfinite(loss_map)]
            losses.append(float(valid_losses.mean()) if valid_losses.size else None)
        else:
            losses.append(None)
        d = _view_dir(out_dir, i)
        save_material_maps(maps, d)
        write_pfm(d / "confidence.pfm", solver_confidence(data).astype(np.float32))
        maps_list.append(maps)
    return maps_list, losses


def stage_smooth(scene: SceneDescription, out_dir,
                 maps_list=None) -> list[MaterialMaps]:
    """Bilateral-smooth specular and roughness of every view's maps, guided
    by the predicted diffuse and weighted by the written confidence raster;
    maps are rewritten in place."""
    from .images import read_pfm

    params = SolverParams.from_dict(scene.bilateral_cfg)
    smoothed = []
    for i in range(scene.num_views):
        d = _view_dir(out_dir, i)
        maps = maps_list[i] if maps_list is not None else load_material_maps(d)
        conf_path = d / "confidence.pfm"
        confidence = read_pfm(conf_path).astype(np.float64) \
            if conf_path.exists() else None
        out = smooth_specular_roughness(maps, params, confidence=confidence)
        save_material_maps(out, d)
        smoothed.append(out)
    return smoothed


def stage_bake(scene: SceneDescription, out_dir,
               maps_list=None) -> MaterialAtlas:
    if maps_list is None:
        maps_list = [load_material_maps(_view_dir(out_dir, i))
                     for i in range(scene.num_views)]
    atlas = bake_atlas(scene, maps_list, scene.atlas_resolution)
    d = Path(out_dir) / "atlas"
    d.mkdir(parents=True, exist_ok=True)
    m3 = atlas.sample_mask[:, :, None]
    write_pfm(d / "diffuse.pfm", np.where(m3, atlas.diffuse, 0.0))
    write_pfm(d / "specular.pfm", np.where(m3, atlas.specular, 0.0))
    write_pfm(d / "roughness.pfm", np.where(atlas.sample_mask, atlas.roughness, 0.0))
    write_png_preview(d / "diffuse.png", atlas.diffuse)
    write_png_preview(d / "specular.png", atlas.specular)
    write_png_preview(d / "roughness.png", atlas.roughness, encode_gamma=False)
    write_png_preview(d / "coverage.png", atlas.coverage.astype(np.float64),
                      encode_gamma=False)
    return atlas


def load_atlas(out_dir) -> MaterialAtlas:
    from .images import read_pfm

    d = Path(out_dir) / "atlas"
    diffuse = read_pfm(d / "diffuse.pfm")
    specular = read_pfm(d / "specular.pfm")
    roughness = read_pfm(d / "roughness.pfm")
    mask = roughness > 0.0
    return MaterialAtlas(diffuse=diffuse, specular=specular, roughness=roughness,
                         coverage=mask, count=mask.astype(np.int32),
                         sample_mask=mask)


def stage_rerender(scene: SceneDescription, atlas: MaterialAtlas,
                   out_dir) -> list[RadianceImage]:
    d = Path(out_dir) / "renders"
    d.mkdir(parents=True, exist_ok=True)
    renders = []
    for i, cam in enumerate(scene.cameras):
        img = rerender(atlas, scene.mesh, cam,
                       point_lights=scene.point_lights,
                       sg_lights=scene.sg_lights)
        save_image(img, d / f"{i:03d}.pfm")
        renders.append(img)
    return renders


def stage_validate(scene: SceneDescription, renders) -> list[float]:
    return [psnr(render, ref) for render, ref in zip(renders, scene.images)]


def run_pipeline(config_path, out_dir, seed: int | None = None,
                 dump_stats: bool = False) -> PipelineReport:
    """Run every stage and write all artifacts plus report.json."""
    report = PipelineReport()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def timed(stage, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except ConfigError:
            raise
        except Exception as e:  # surface the stage name with the cause
            raise StageError(stage, e) from e
        report.stage_seconds[stage] = time.perf_counter() - t0
        return result

    t0 = time.perf_counter()
    try:
        scene = load_scene_config(config_path)
    except MatforgeError as e:
        # anything wrong with referenced inputs is a config problem
        raise ConfigError(f"load stage: {e}") from e
    report.stage_seconds["load"] = time.perf_counter() - t0
    if seed is None:
        seed = scene.seed
    report.seed = seed
    report.num_views = scene.num_views
    _packed, datas = timed("stats", lambda: stage_stats(scene, out_dir, dump_stats))
    maps_list, losses = timed("predict",
                              lambda: stage_predict(scene, datas, out_dir, seed))
    report.per_view_loss = losses
    smoothed = timed("smooth", lambda: stage_smooth(scene, out_dir, maps_list))
    atlas = timed("bake", lambda: stage_bake(scene, out_dir, smoothed))
    report.coverage_fraction = atlas.coverage_fraction
    renders = timed("rerender", lambda: stage_rerender(scene, atlas, out_dir))
    report.psnr_db = timed("validate", lambda: stage_validate(scene, renders))
    report.save(out_dir / "report.json")
    return report
