"""Experiment harness: validated JSON configs in, CSV/JSON reports out.

Every report embeds the fully resolved configuration (defaults included) so
it is self-describing, and all outputs are deterministic functions of
(config, seed) on one platform: instances run in order, floats are written
with shortest round-trip repr, JSON keys are sorted, and CSV uses '.'
decimals, ',' separators, and LF line endings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .metrics import TestbedSpec, evaluate_edit
from .pivot import PivotGrid, locate_pivot
from .predictor import (
    ConditionEmbedding,
    GmmModelSpec,
    GmmPredictor,
    gmm_spec_from_dict,
)
from .schedule import (
    DEFAULT_BASE_RESOLUTION,
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    NoiseSchedule,
    build_linear_schedule,
)
from .stepper import GuidanceConfig, LatentState
from .zigzag import EditRun, ZigZagConfig, baseline_edit, zz_edit


class ConfigError(ValueError):
    """Malformed experiment configuration."""


_SCHEDULE_DEFAULTS = {
    "T": 50,
    "base_resolution": DEFAULT_BASE_RESOLUTION,
    "beta_start": DEFAULT_BETA_START,
    "beta_end": DEFAULT_BETA_END,
}
_GUIDANCE_DEFAULTS = {
    "omega_inv": 1.0,
    "omega_zz": 1.0,
    "omega_final": 7.5,
    "use_cfg_inv": False,
    "use_cfg_zz": False,
    "use_cfg_final": True,
}
_ZIGZAG_DEFAULTS = {
    "a": 1.0,
    "grid": [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
    "a_sweep": [],
}
_TESTBED_DEFAULTS = {
    "seed": 0,
    "n_instances": 10,
    "background_dims": [],
}
_TOP_LEVEL_KEYS = {
    "schedule", "model", "model_path", "conditions", "guidance", "zigzag",
    "testbed", "methods", "output_dir",
}


def _merge_section(name: str, raw: dict, defaults: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be an object")
    unknown = set(raw) - set(defaults)
    if unknown:
        raise ConfigError(f"section '{name}' has unknown keys {sorted(unknown)}")
    return {**defaults, **raw}


def _weights(name: str, raw) -> ConditionEmbedding:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"'{name}' must be a nonempty list of weights")
    try:
        return ConditionEmbedding(np.array(raw, dtype=np.float64))
    except ValueError as exc:
        raise ConfigError(f"'{name}': {exc}") from exc


@dataclass(frozen=True)
class Method:
    """A named pipeline variant: baseline, zzedit, or a fixed-pivot edit."""

    kind: str
    fixed_pivot: int | None = None
    a: float | None = None

    @property
    def label(self) -> str:
        if self.kind == "fixed_pivot":
            return f"fixed_pivot[p={self.fixed_pivot}]"
        if self.kind == "zzedit" and self.a is not None:
            return f"zzedit[a={self.a:g}]"
        return self.kind


def _parse_method(raw) -> Method:
    if not isinstance(raw, str):
        raise ConfigError(f"method entries must be strings, got {raw!r}")
    if raw in ("baseline", "zzedit"):
        return Method(kind=raw)
    if raw.startswith("fixed_pivot:"):
        try:
            p = int(raw.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"malformed fixed_pivot method {raw!r}") from None
        if p < 1:
            raise ConfigError(f"fixed_pivot level must be >= 1, got {p}")
        return Method(kind="fixed_pivot", fixed_pivot=p)
    raise ConfigError(f"unknown method {raw!r}")


@dataclass
class ExperimentConfig:
    """Fully resolved experiment settings."""

    schedule: NoiseSchedule
    model: GmmModelSpec
    c_src: ConditionEmbedding
    c_tgt: ConditionEmbedding
    zigzag: ZigZagConfig
    grid: PivotGrid
    a_sweep: list[float]
    testbed: TestbedSpec
    methods: list[Method]
    output_dir: Path
    resolved: dict

    @staticmethod
    def from_dict(raw: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(raw) - _TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

        sched_raw = _merge_section("schedule", raw.get("schedule", {}),
                                   _SCHEDULE_DEFAULTS)
        try:
            schedule = build_linear_schedule(
                int(sched_raw["T"]),
                base_resolution=int(sched_raw["base_resolution"]),
                beta_start=float(sched_raw["beta_start"]),
                beta_end=float(sched_raw["beta_end"]),
            )
        except ValueError as exc:
            raise ConfigError(f"schedule: {exc}") from exc

        if "model" in raw and "model_path" in raw:
            raise ConfigError("give either 'model' or 'model_path', not both")
        if "model_path" in raw:
            path = Path(raw["model_path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"model_path does not exist: {path}")
            model_raw = json.loads(path.read_text())
        elif "model" in raw:
            model_raw = raw["model"]
        else:
            raise ConfigError("config must provide 'model' or 'model_path'")
        try:
            model = gmm_spec_from_dict(model_raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc

        conditions = raw.get("conditions")
        if not isinstance(conditions, dict) or set(conditions) != {"source", "target"}:
            raise ConfigError("'conditions' must be {'source': [...], 'target': [...]}")
        c_src = _weights("conditions.source", conditions["source"])
        c_tgt = _weights("conditions.target", conditions["target"])
        for name, cond in (("source", c_src), ("target", c_tgt)):
            if len(cond) != model.n_components:
                raise ConfigError(
                    f"conditions.{name} has {len(cond)} weights, model has "
                    f"{model.n_components} components"
                )

        guid = _merge_section("guidance", raw.get("guidance", {}),
                              _GUIDANCE_DEFAULTS)
        zz_raw = _merge_section("zigzag", raw.get("zigzag", {}), _ZIGZAG_DEFAULTS)
        try:
            zigzag = ZigZagConfig(
                a=float(zz_raw["a"]),
                omega_inv=GuidanceConfig(float(guid["omega_inv"]),
                                         bool(guid["use_cfg_inv"])),
                omega_zz=GuidanceConfig(float(guid["omega_zz"]),
                                        bool(guid["use_cfg_zz"])),
                omega_final=GuidanceConfig(float(guid["omega_final"]),
                                           bool(guid["use_cfg_final"])),
            )
            grid = PivotGrid(tuple(float(f) for f in zz_raw["grid"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"zigzag/guidance: {exc}") from exc
        a_sweep = zz_raw["a_sweep"]
        if not isinstance(a_sweep, list) or any(
            not isinstance(v, (int, float)) or not 0.0 <= float(v) <= 1.0
            for v in a_sweep
        ):
            raise ConfigError("zigzag.a_sweep must be a list of values in [0, 1]")
        a_sweep = [float(v) for v in a_sweep]

        tb_raw = _merge_section("testbed", raw.get("testbed", {}),
                                _TESTBED_DEFAULTS)
        seed = tb_raw["seed"]
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("testbed.seed must be an integer u64")
        try:
            testbed = TestbedSpec(
                model=model,
                c_src=c_src,
                c_tgt=c_tgt,
                background_dims=tuple(int(d) for d in tb_raw["background_dims"]),
                seed=seed,
                n_instances=int(tb_raw["n_instances"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"testbed: {exc}") from exc

        methods_raw = raw.get("methods", ["baseline", "zzedit"])
        if not isinstance(methods_raw, list) or not methods_raw:
            raise ConfigError("'methods' must be a nonempty list")
        methods = [_parse_method(m) for m in methods_raw]

        output_dir = Path(raw.get("output_dir", "out"))
        if base_dir is not None and not output_dir.is_absolute():
            output_dir = base_dir / output_dir

        resolved = {
            "schedule": sched_raw,
            "model": json.loads(model.to_json()),
            "conditions": {
                "source": list(c_src.weights),
                "target": list(c_tgt.weights),
            },
            "guidance": guid,
            "zigzag": {"a": zigzag.a, "grid": list(grid.fractions),
                       "a_sweep": a_sweep},
            "testbed": {
                "seed": testbed.seed,
                "n_instances": testbed.n_instances,
                "background_dims": list(testbed.background_dims),
            },
            "methods": [m.label for m in methods],
            "output_dir": str(output_dir),
        }
        return ExperimentConfig(
            schedule=schedule,
            model=model,
            c_src=c_src,
            c_tgt=c_tgt,
            zigzag=zigzag,
            grid=grid,
            a_sweep=a_sweep,
            testbed=testbed,
            methods=methods,
            output_dir=output_dir,
            resolved=resolved,
        )

    @staticmethod
    def from_file(path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file does not exist: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return ExperimentConfig.from_dict(raw, base_dir=path.parent)

    def with_overrides(self, seed: int | None = None,
                       output_dir: str | Path | None = None) -> "ExperimentConfig":
        raw = json.loads(json.dumps(self.resolved))
        # Resolved method entries are display labels; rebuild parseable forms.
        raw["methods"] = [
            f"fixed_pivot:{m.fixed_pivot}" if m.kind == "fixed_pivot" else m.kind
            for m in self.methods
        ]
        if seed is not None:
            raw["testbed"]["seed"] = seed
        if output_dir is not None:
            raw["output_dir"] = str(output_dir)
        return ExperimentConfig.from_dict(raw)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write(text)


def _csv_line(cells) -> str:
    out = []
    for cell in cells:
        out.append(repr(cell) if isinstance(cell, float) else str(cell))
    return ",".join(out) + "\n"


def _json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _run_method(
    method: Method,
    z_0: LatentState,
    config: ExperimentConfig,
    a_override: float | None = None,
) -> EditRun:
    predictor = GmmPredictor(config.model)
    null_cond = config.model.null_weights
    zz = config.zigzag
    if a_override is not None:
        zz = ZigZagConfig(a=a_override, omega_zz=zz.omega_zz,
                          omega_inv=zz.omega_inv, omega_final=zz.omega_final)
    if method.kind == "baseline":
        return baseline_edit(
            z_0, predictor, config.c_src, config.c_tgt, null_cond,
            zz.omega_inv, zz.omega_final, config.schedule,
        )
    return zz_edit(
        z_0, config.grid, predictor, config.c_src, config.c_tgt, null_cond,
        zz, config.schedule, forced_pivot=method.fixed_pivot,
    )


def cmd_schedule(config: ExperimentConfig, out_dir: Path) -> Path:
    """Dump the schedule as CSV rows (t, base_index, alpha_bar)."""
    lines = ["t,base_index,alpha_bar\n"]
    schedule = config.schedule
    lines.append(_csv_line((0, 0, float(schedule.alpha_bar[0]))))
    for t in range(1, schedule.T + 1):
        lines.append(_csv_line((
            t, int(schedule.base_index[t - 1]), float(schedule.alpha_bar[t])
        )))
    path = out_dir / "schedule.csv"
    _write_text(path, "".join(lines))
    return path


def cmd_pivot(config: ExperimentConfig, out_dir: Path,
              echo: IO[str] | None = None) -> tuple[Path, Path]:
    """Locate the pivot for every instance; report JSON, CSV, and histogram."""
    predictor = GmmPredictor(config.model)
    null_cond = config.model.null_weights
    reports = []
    csv_lines = ["instance_id,t,resp_src,resp_tgt,chosen\n"]
    histogram: dict[int, int] = {}
    for idx, z_0 in enumerate(config.testbed.instances()):
        report, _ = locate_pivot(
            z_0, config.grid, predictor, config.c_src, config.c_tgt,
            null_cond, config.zigzag.omega_inv, config.schedule,
        )
        reports.append({"instance_id": idx, **report.to_dict()})
        for row in report.csv_rows():
            csv_lines.append(_csv_line((idx, *row)))
        histogram[report.p] = histogram.get(report.p, 0) + 1

    if echo is not None:
        echo.write("instance  p   degenerate  probe_calls\n")
        for entry in reports:
            echo.write(
                f"{entry['instance_id']:>8}  {entry['p']:>3} "
                f"{str(entry['degenerate']):>11}  {entry['probe_calls']:>11}\n"
            )

    json_path = out_dir / "pivot_reports.json"
    csv_path = out_dir / "pivot_candidates.csv"
    _write_text(json_path, _json_text({
        "config": config.resolved,
        "reports": reports,
        "histogram": {str(k): v for k, v in sorted(histogram.items())},
    }))
    _write_text(csv_path, "".join(csv_lines))
    return json_path, csv_path


def cmd_edit(config: ExperimentConfig, out_dir: Path) -> Path:
    """Run the pivot-located edit on every instance; dump per-instance runs."""
    runs = []
    for idx, z_0 in enumerate(config.testbed.instances()):
        run = _run_method(Method(kind="zzedit"), z_0, config)
        runs.append({"instance_id": idx, **run.to_dict()})
    path = out_dir / "edit_runs.json"
    _write_text(path, _json_text({"config": config.resolved, "runs": runs}))
    return path


def _method_plan(config: ExperimentConfig) -> list[tuple[Method, float | None]]:
    """Expand configured methods with the optional a-sweep for zzedit."""
    plan: list[tuple[Method, float | None]] = []
    for method in config.methods:
        if method.kind == "zzedit" and config.a_sweep:
            for a in config.a_sweep:
                plan.append((Method(kind="zzedit", a=a), a))
        else:
            plan.append((method, None))
    return plan


def cmd_compare(config: ExperimentConfig, out_dir: Path) -> tuple[Path, Path]:
    """Score every configured method over the seeded testbed."""
    plan = _method_plan(config)
    csv_lines = [
        "instance_id,method,p,K,a,omega,fidelity_err,recon_err,target_loglik\n"
    ]
    per_method: dict[str, list] = {m.label: [] for m, _ in plan}
    for idx, z_0 in enumerate(config.testbed.instances()):
        for method, a_override in plan:
            run = _run_method(method, z_0, config, a_override)
            m = evaluate_edit(run, config.testbed, z_0)
            a_value = a_override if a_override is not None else config.zigzag.a
            if method.kind == "baseline":
                a_value = 0.0
            csv_lines.append(_csv_line((
                idx, method.label, m.pivot_p, m.K, float(a_value),
                float(config.zigzag.omega_final.omega),
                m.fidelity_err, m.recon_err, m.target_loglik,
            )))
            per_method[method.label].append(m)

    summary_methods = {}
    for label, entries in per_method.items():
        def stats(values):
            arr = np.array(values, dtype=np.float64)
            return {"mean": float(np.mean(arr)), "std": float(np.std(arr))}

        summary_methods[label] = {
            "fidelity_err": stats([m.fidelity_err for m in entries]),
            "recon_err": stats([m.recon_err for m in entries]),
            "target_loglik": stats([m.target_loglik for m in entries]),
            "pivot_p": stats([float(m.pivot_p) for m in entries]),
            "K": stats([float(m.K) for m in entries]),
        }

    csv_path = out_dir / "metrics.csv"
    json_path = out_dir / "summary.json"
    _write_text(csv_path, "".join(csv_lines))
    _write_text(json_path, _json_text({
        "config": config.resolved,
        "n_instances": config.testbed.n_instances,
        "methods": summary_methods,
    }))
    return csv_path, json_path


def cmd_trace(config: ExperimentConfig, out_dir: Path,
              instance_id: int) -> tuple[Path, Path]:
    """Write full trajectory CSVs for one instance, baseline and zzedit."""
    instances = config.testbed.instances()
    if not 0 <= instance_id < len(instances):
        raise ConfigError(
            f"instance_id {instance_id} outside 0..{len(instances) - 1}"
        )
    z_0 = instances[instance_id]
    paths = []
    for method in (Method(kind="baseline"), Method(kind="zzedit")):
        run = _run_method(method, z_0, config)
        path = out_dir / f"trace_{method.kind}_{instance_id}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as handle:
            run.trajectory.write_csv(handle)
        paths.append(path)
    return paths[0], paths[1]
