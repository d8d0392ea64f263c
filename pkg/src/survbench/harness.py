"""Benchmark orchestration: configuration, the two-arm pipeline, reports.

`run_benchmark` executes ingest -> preprocess -> split -> fit -> evaluate ->
audit under one master seed and writes every table the benchmark produces.
Arms are always reported separately; no table ever ranks dynamic against
comparable families.
"""

import csv
import itertools
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as post
from .cohort import ENROLLMENT_KEY
from .errors import ConfigError, DataError, SurvbenchError
from .families import (
    ARM_COMPARABLE,
    ARM_DYNAMIC,
    COMPARABLE_FAMILIES,
    DYNAMIC_FAMILIES,
    ArmData,
    comparable_encoder,
    dynamic_encoder,
    get_family,
)
from .features import build_evaluation_panel, comparable_table, expand_person_period
from .ingest import load_cohort, load_oulad
from .metrics import evaluate_model, integrated_brier, km_censoring
from .seeding import stage_seed
from .split import SplitSpec, audit_split, stratified_split
from .synth import SyntheticSpec, default_benchmark_spec, generate_cohort

logger = logging.getLogger(__name__)

__version__ = "0.1.0"

OUTPUT_DIR_ENV = "SURVBENCH_OUTPUT_DIR"

REPORT_FILES = [
    "main_benchmark.csv", "calibration.csv", "ablation.csv", "importance.csv",
    "bootstrap.csv", "ph_audit.csv", "split_audit.json", "report.json",
    "plotdata.csv",
]


@dataclass
class BenchConfig:
    """Declarative benchmark configuration; see README for the file schema."""

    data: dict = field(default_factory=dict)
    arms: list = field(default_factory=lambda: [ARM_DYNAMIC, ARM_COMPARABLE])
    models: dict = field(default_factory=dict)
    early_window: int = 4
    window_grid: list = field(default_factory=lambda: [2, 4, 6, 8, 10])
    horizons: list = field(default_factory=lambda: [10, 20, 30])
    tau_max: int = 30
    calibration_bins: int = 10
    test_fraction: float = 0.30
    bootstrap_resamples: int = 200
    importance_repeats: int = 10
    importance_metric: str = "td_concordance"
    analyses: list = field(default_factory=lambda: ["bootstrap", "ablation",
                                                    "importance", "ph_audit"])
    seed: int = 20240901
    output_dir: str = "survbench_out"
    n_jobs: int = 1

    def validate(self):
        if self.early_window < 1:
            raise ConfigError("early_window must be >= 1")
        if any(h > self.tau_max for h in self.horizons):
            raise ConfigError(
                f"horizons {self.horizons} exceed tau_max {self.tau_max}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.bootstrap_resamples < 1:
            raise ConfigError("bootstrap_resamples must be >= 1")
        if self.importance_repeats < 1:
            raise ConfigError("importance_repeats must be >= 1")
        for arm in self.arms:
            if arm not in (ARM_DYNAMIC, ARM_COMPARABLE):
                raise ConfigError(f"unknown arm '{arm}'")
        unknown = set(self.analyses) - {"bootstrap", "ablation", "importance", "ph_audit"}
        if unknown:
            raise ConfigError(f"unknown analyses {sorted(unknown)}")
        if not self.data:
            raise ConfigError("config needs a 'data' section")
        return self

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return BenchConfig.from_dict(json.load(fh)).validate()


def resolve_output_dir(config, override=None):
    out = override or os.environ.get(OUTPUT_DIR_ENV) or config.output_dir
    return Path(out)


def load_data(config):
    """Materialize the cohort named by the config's data section."""
    data = config.data
    kind = data.get("kind")
    if kind == "synthetic":
        spec = (SyntheticSpec.from_dict(data["spec"]) if "spec" in data
                else default_benchmark_spec(n=data.get("n", 5000)))
        cohort, _truth = generate_cohort(spec, seed=stage_seed(config.seed, "synth"))
        return cohort
    if kind == "native":
        return load_cohort(data["enrollments"], data["activity"],
                           column_map=data.get("column_map"),
                           static_categorical=data.get("static_categorical"),
                           static_numeric=data.get("static_numeric"))
    if kind == "oulad":
        return load_oulad(data["dir"],
                          negative_unregistration=data.get("negative_unregistration",
                                                           "exclude"))
    raise ConfigError(f"unknown data kind '{kind}'")


def default_roster(config):
    roster = {}
    if ARM_COMPARABLE in config.arms:
        roster[ARM_COMPARABLE] = [{"name": n} for n in COMPARABLE_FAMILIES]
    if ARM_DYNAMIC in config.arms:
        roster[ARM_DYNAMIC] = [{"name": n} for n in DYNAMIC_FAMILIES]
    for arm, entries in (config.models or {}).items():
        roster[arm] = entries
    return roster


def _targets(enrollments, ids):
    table = enrollments.set_index(ENROLLMENT_KEY).loc[ids]
    return (table["observed_time_weeks"].to_numpy(dtype=float),
            table["event"].to_numpy(dtype=int))


def prepare_arm_data(cohort, train_ids, test_ids, config, arms=None, early_window=None):
    """Build the per-arm train/test inputs for one split."""
    arms = arms if arms is not None else config.arms
    w = early_window if early_window is not None else config.early_window
    grid = np.arange(config.tau_max + 1)
    test_times, test_events = _targets(cohort.enrollments, test_ids)
    out = {}
    if ARM_COMPARABLE in arms:
        table = comparable_table(cohort, w).set_index(ENROLLMENT_KEY)
        train_times, train_events = _targets(cohort.enrollments, train_ids)
        out[ARM_COMPARABLE] = ArmData(
            arm=ARM_COMPARABLE, grid=grid, test_ids=np.asarray(test_ids),
            test_times=test_times, test_events=test_events,
            train_frame=table.loc[train_ids].reset_index(),
            test_frame=table.loc[test_ids].reset_index(),
            train_times=train_times, train_events=train_events)
    if ARM_DYNAMIC in arms:
        out[ARM_DYNAMIC] = ArmData(
            arm=ARM_DYNAMIC, grid=grid, test_ids=np.asarray(test_ids),
            test_times=test_times, test_events=test_events,
            panel_train=expand_person_period(cohort.subset(train_ids)),
            eval_panel=build_evaluation_panel(cohort.subset(test_ids), config.tau_max))
    return out


def _encoder_for(arm, cohort):
    return comparable_encoder(cohort) if arm == ARM_COMPARABLE else dynamic_encoder(cohort)


def _forest_jobs(params, config):
    out = dict(params or {})
    if out.get("n_jobs") is None:
        out["n_jobs"] = config.n_jobs
    return out


def tune_family(family, cohort, train_ids, config, params, grid):
    """Small grid search on a held-out fifth of the training enrollments."""
    combos = [dict(zip(grid, values))
              for values in itertools.product(*grid.values())]
    if len(combos) <= 1:
        params = dict(params or {})
        params.update(combos[0] if combos else {})
        return params
    sub_spec = SplitSpec(test_fraction=0.2, seed=stage_seed(config.seed, "tuning"))
    train_enr = cohort.enrollments[
        cohort.enrollments[ENROLLMENT_KEY].isin(set(train_ids))].reset_index(drop=True)
    sub_train, sub_val = stratified_split(train_enr, sub_spec)
    data = prepare_arm_data(cohort, sub_train, sub_val, config, arms=[family.arm])
    best, best_ibs = None, np.inf
    for combo in combos:
        candidate = dict(params or {})
        candidate.update(combo)
        if family.name == "survival_forest":
            candidate = _forest_jobs(candidate, config)
        fitted = family.fit(data[family.arm], _encoder_for(family.arm, cohort),
                            params=candidate, seed=stage_seed(config.seed, "tuning"))
        design = fitted.encoder.transform(data[family.arm].test_design_frame)
        curves = fitted.predict_curves(design, data[family.arm].test_ids)
        censoring = km_censoring(data[family.arm].test_times, data[family.arm].test_events)
        ibs = integrated_brier(curves, data[family.arm].test_times,
                               data[family.arm].test_events, censoring, config.tau_max)
        if ibs < best_ibs:
            best, best_ibs = candidate, ibs
    logger.info("tuned %s -> %s (validation IBS %.5f)", family.name, best, best_ibs)
    return best


@dataclass
class BenchmarkReport:
    """Everything one benchmark run produced, ready for serialization."""

    config: dict
    version: str
    stage_seeds: dict
    split_audit: dict
    metric_reports: list = field(default_factory=list)
    bootstrap: list = field(default_factory=list)
    ablation_rows: list = field(default_factory=list)
    ibs_ratios: dict = field(default_factory=dict)
    importance: list = field(default_factory=list)
    ph_audit: object = None
    failures: list = field(default_factory=list)
    metadata: dict = field(default_factory=lambda: {
        "cox_ties": "breslow",
        "bootstrap_tie_break": "lexicographic_model_name"})

    @property
    def complete(self):
        return not self.failures


def run_benchmark(config, output_dir=None, emit=True):
    """Execute the full two-arm pipeline; returns the assembled report."""
    config.validate()
    master = config.seed
    cohort = load_data(config)

    split_spec = SplitSpec(test_fraction=config.test_fraction,
                           seed=stage_seed(master, "split"))
    train_ids, test_ids = stratified_split(cohort.enrollments, split_spec)
    audit = audit_split(cohort.enrollments, train_ids, test_ids)
    if audit.identity_leakage:
        raise DataError("identity leakage detected; refusing to run the benchmark")

    arm_data = prepare_arm_data(cohort, train_ids, test_ids, config)
    roster = default_roster(config)

    stage_names = ["synth", "split", "bootstrap", "importance", "ablation"]
    stage_names += [f"model:{entry['name']}" for entries in roster.values()
                    for entry in entries]
    report = BenchmarkReport(
        config=config.to_dict(), version=__version__,
        stage_seeds={name: stage_seed(master, name) for name in stage_names},
        split_audit=audit.to_dict())

    fitted_by_arm = {arm: {} for arm in config.arms}
    curves_by_arm = {arm: {} for arm in config.arms}
    entries_by_name = {}

    for arm in config.arms:
        for entry in roster.get(arm, []):
            name = entry["name"]
            family = get_family(name)
            if family.arm != arm:
                raise ConfigError(f"family '{name}' belongs to the {family.arm} arm")
            entries_by_name[name] = entry
            seed = stage_seed(master, f"model:{name}")
            try:
                params = dict(entry.get("params") or {})
                if entry.get("grid"):
                    params = tune_family(family, cohort, train_ids, config,
                                         params, entry["grid"])
                if name == "survival_forest":
                    params = _forest_jobs(params, config)
                fitted = family.fit(arm_data[arm], _encoder_for(arm, cohort),
                                    params=params, seed=seed)
                design = fitted.encoder.transform(arm_data[arm].test_design_frame)
                curves = fitted.predict_curves(design, arm_data[arm].test_ids)
                metric_report = evaluate_model(
                    name, arm, curves, arm_data[arm].test_times,
                    arm_data[arm].test_events, config.horizons, config.tau_max,
                    n_bins=config.calibration_bins)
            except SurvbenchError as exc:
                logger.error("family %s failed: %s", name, exc)
                report.failures.append({"stage": f"model:{name}", "error": str(exc)})
                continue
            fitted_by_arm[arm][name] = fitted
            curves_by_arm[arm][name] = curves
            report.metric_reports.append(metric_report)

    _run_analyses(config, report, cohort, arm_data, fitted_by_arm, curves_by_arm,
                  entries_by_name)

    if emit:
        outdir = resolve_output_dir(config, output_dir)
        emit_reports(report, outdir)
    return report


def _run_analyses(config, report, cohort, arm_data, fitted_by_arm, curves_by_arm,
                  entries_by_name):
    metrics = ["ibs", "td_concordance"] + [f"brier@{h}" for h in config.horizons]

    if "bootstrap" in config.analyses:
        for arm in config.arms:
            curves = curves_by_arm[arm]
            if not curves:
                continue
            try:
                result = post.bootstrap_ranks(
                    curves, arm_data[arm].test_times, arm_data[arm].test_events,
                    metrics, n_resamples=config.bootstrap_resamples,
                    seed=stage_seed(config.seed, "bootstrap"), tau_max=config.tau_max)
                report.bootstrap.append((arm, result))
            except SurvbenchError as exc:
                report.failures.append({"stage": f"bootstrap:{arm}", "error": str(exc)})

    if "ablation" in config.analyses:
        for arm in config.arms:
            for name, fitted in fitted_by_arm[arm].items():
                family = get_family(name)
                params = dict(entries_by_name[name].get("params") or {})
                if name == "survival_forest":
                    params = _forest_jobs(params, config)
                try:
                    result = post.run_ablation(
                        family, arm_data[arm], _encoder_for(arm, cohort),
                        params=params, seed=stage_seed(config.seed, "ablation"))
                    report.ablation_rows.extend(result.rows)
                    report.ibs_ratios.update(result.ibs_ratio)
                except SurvbenchError as exc:
                    report.failures.append({"stage": f"ablation:{name}",
                                            "error": str(exc)})

    if "importance" in config.analyses:
        for arm in config.arms:
            for name, fitted in fitted_by_arm[arm].items():
                try:
                    design = fitted.encoder.transform(arm_data[arm].test_design_frame)
                    result = post.grouped_permutation_importance(
                        fitted, design, arm_data[arm].test_times,
                        arm_data[arm].test_events, metric=config.importance_metric,
                        n_repeats=config.importance_repeats,
                        seed=stage_seed(config.seed, "importance"))
                    report.importance.append(result)
                except SurvbenchError as exc:
                    report.failures.append({"stage": f"importance:{name}",
                                            "error": str(exc)})

    if "ph_audit" in config.analyses and "cox" in fitted_by_arm.get(ARM_COMPARABLE, {}):
        try:
            fitted = fitted_by_arm[ARM_COMPARABLE]["cox"]
            data = arm_data[ARM_COMPARABLE]
            design = fitted.encoder.transform(data.test_frame)
            report.ph_audit = post.ph_audit(
                fitted.model, design.X, data.test_times, data.test_events,
                columns=design.columns)
        except SurvbenchError as exc:
            report.failures.append({"stage": "ph_audit", "error": str(exc)})


def run_window_grid(config, output_dir=None, emit=True):
    """Re-run the comparable arm for each early-window length in the grid."""
    config.validate()
    if ARM_COMPARABLE not in config.arms:
        raise ConfigError("window grid needs the comparable arm enabled")
    cohort = load_data(config)
    split_spec = SplitSpec(test_fraction=config.test_fraction,
                           seed=stage_seed(config.seed, "split"))
    train_ids, test_ids = stratified_split(cohort.enrollments, split_spec)
    roster = default_roster(config).get(ARM_COMPARABLE, [])

    rows = []
    for w in config.window_grid:
        data = prepare_arm_data(cohort, train_ids, test_ids, config,
                                arms=[ARM_COMPARABLE], early_window=w)[ARM_COMPARABLE]
        for entry in roster:
            name = entry["name"]
            family = get_family(name)
            params = dict(entry.get("params") or {})
            if name == "survival_forest":
                params = _forest_jobs(params, config)
            fitted = family.fit(data, _encoder_for(ARM_COMPARABLE, cohort),
                                params=params,
                                seed=stage_seed(config.seed, f"model:{name}"))
            design = fitted.encoder.transform(data.test_frame)
            curves = fitted.predict_curves(design, data.test_ids)
            metric_report = evaluate_model(
                name, ARM_COMPARABLE, curves, data.test_times, data.test_events,
                config.horizons, config.tau_max, with_calibration=False)
            rows.append({"window_weeks": w, "model": name,
                         "ibs": metric_report.ibs,
                         "td_concordance": metric_report.td_concordance})
    if emit:
        outdir = resolve_output_dir(config, output_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_csv(outdir / "window_grid.csv",
                  ["window_weeks", "model", "ibs", "td_concordance"], rows)
    return rows


def fnum(x):
    """Stable text form for report numbers (12 significant digits)."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return ""
    return format(x, ".12g")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fnum(row.get(col)) for col in header])


def jsonable(obj):
    """Recursively convert numpy scalars/arrays for JSON (NaN becomes null)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if np.isnan(x) else x
    return obj


def emit_reports(report, outdir):
    """Write every benchmark artifact; returns the list of file paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    main_header = ["arm", "model", "ibs", "td_concordance"] + [
        f"brier@{h}" for h in report.config["horizons"]]
    main_rows = [r.to_dict() for r in report.metric_reports]
    write_csv(outdir / "main_benchmark.csv", main_header, main_rows)

    horizons = list(report.config["horizons"])
    calib_header = (["arm", "model"] + [f"calib@{h}" for h in horizons]
                    + [f"slope@{h}" for h in horizons]
                    + [f"intercept@{h}" for h in horizons])
    calib_rows = []
    calib_bins = []
    for r in report.metric_reports:
        row = {"arm": r.arm, "model": r.model}
        for cal in r.calibration:
            row[f"calib@{cal.horizon}"] = cal.gap
            row[f"slope@{cal.horizon}"] = cal.slope
            row[f"intercept@{cal.horizon}"] = cal.intercept
            calib_bins.append({"arm": r.arm, "model": r.model, **cal.to_dict()})
        calib_rows.append(row)
    write_csv(outdir / "calibration.csv", calib_header, calib_rows)

    abl_header = ["arm", "model", "removed_block", "delta_ibs", "delta_td", "ibs_ratio"]
    abl_rows = []
    for row in report.ablation_rows:
        abl_rows.append({"arm": row.arm, "model": row.model,
                         "removed_block": row.removed_block,
                         "delta_ibs": row.delta_ibs, "delta_td": row.delta_td,
                         "ibs_ratio": report.ibs_ratios.get(row.model)
                         if row.removed_block != "static_structural" else None})
    write_csv(outdir / "ablation.csv", abl_header, abl_rows)

    imp_header = ["arm", "model", "metric", "kind", "name",
                  "mean_degradation", "std_degradation"]
    imp_rows = []
    for result in report.importance:
        imp_rows.extend(result.rows())
    write_csv(outdir / "importance.csv", imp_header, imp_rows)

    boot_header = ["arm", "model", "metric", "point", "ci_lower", "ci_upper",
                   "rank1_share"]
    boot_rows = []
    for arm, result in report.bootstrap:
        for row in result.rows():
            row["arm"] = arm
            boot_rows.append(row)
    write_csv(outdir / "bootstrap.csv", boot_header, boot_rows)

    ph_header = ["column", "statistic", "p_value", "flagged"]
    ph_rows = list(report.ph_audit.rows()) if report.ph_audit else []
    write_csv(outdir / "ph_audit.csv", ph_header,
              [{**r, "flagged": "true" if r["flagged"] else "false"} for r in ph_rows])

    (outdir / "split_audit.json").write_text(
        json.dumps(report.split_audit, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    plot_header = ["arm", "model", "metric", "horizon", "value"]
    plot_rows = []
    for r in report.metric_reports:
        plot_rows.append({"arm": r.arm, "model": r.model, "metric": "ibs",
                          "horizon": None, "value": r.ibs})
        plot_rows.append({"arm": r.arm, "model": r.model, "metric": "td_concordance",
                          "horizon": None, "value": r.td_concordance})
        for h, v in sorted(r.brier.items()):
            plot_rows.append({"arm": r.arm, "model": r.model, "metric": "brier",
                              "horizon": h, "value": v})
        for row in r.calibration:
            plot_rows.append({"arm": r.arm, "model": r.model, "metric": "calibration_gap",
                              "horizon": row.horizon, "value": row.gap})
    write_csv(outdir / "plotdata.csv", plot_header, plot_rows)

    payload = jsonable({
        "version": report.version,
        "config": report.config,
        "stage_seeds": report.stage_seeds,
        "metadata": report.metadata,
        "split_audit": report.split_audit,
        "main_benchmark": main_rows,
        "calibration": calib_rows,
        "calibration_bins": calib_bins,
        "ablation": abl_rows,
        "ibs_ratios": report.ibs_ratios,
        "importance": [
            {"model": r.model, "arm": r.arm, "metric": r.metric,
             "dominant_block": r.dominant_block, "top_feature": r.top_feature,
             "blocks": {k: list(v) for k, v in r.blocks.items()},
             "features": {k: list(v) for k, v in r.features.items()}}
            for r in report.importance],
        "bootstrap": boot_rows,
        "ph_audit": None if report.ph_audit is None else {
            "rows": list(report.ph_audit.rows()),
            "flagged_fraction": report.ph_audit.flagged_fraction,
            "label": report.ph_audit.label,
            "alpha": report.ph_audit.alpha,
            "n_events": report.ph_audit.n_events,
        },
        "manifest": {
            "complete": report.complete,
            "failures": report.failures,
            "files": REPORT_FILES,
        },
    })
    (outdir / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    for name in REPORT_FILES:
        written.append(outdir / name)
    return written
