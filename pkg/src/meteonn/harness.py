"""Experiment grid: (city x season x testing x model x lr x epochs).

Per-cell seeds come from a stable hash of the cell's identity minus its epoch
count, so the 2500/5000/7500-epoch cells of one (model, lr) share an
initialization. The grid exploits this by training each (model, lr) once to
the largest epoch count and snapshotting on the way; a single
``run_experiment`` call for any of those cells reproduces the same params.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    DataError, RawSeries, Season, SplitConfig, WindowSpec, NormalizationParams,
    build_windows, chronological_split, seasonal_runs,
)
from .metrics import KELVIN_OFFSET, METRIC_NAMES, MetricError, MetricReport, evaluate, metric_report
from .models import ModelKind
from .training import (
    ANN_LR_GRID, EPOCH_GRID, LSTM_LR_GRID, DivergenceError, TrainConfig,
    elm_ensemble_fit, elm_member_seeds, scaled_epochs, train_checkpoints,
)
from .core_math import derive_seed

REPORT_CAPTION = "The RMSE, MAPE, MAE and Theil's-U values (unit: %)"
REPORT_FOOTNOTE = ("RMSE and MAE are in the target's own unit: degrees Celsius for temperature, "
                   "percent relative humidity for humidity. MAPE is a percentage; Theil's U is a ratio.")
SEASON_ORDER = list(Season)


@dataclass(frozen=True)
class ExperimentSpec:
    city: str
    season: Season
    testing_id: int
    model_kind: ModelKind
    learning_rate: float | None = None
    epochs: int | None = None
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model_kind", ModelKind.parse(self.model_kind))
        if isinstance(self.season, str):
            object.__setattr__(self, "season", Season.parse(self.season))
        WindowSpec(self.testing_id)
        iterative = self.model_kind is not ModelKind.ELM
        if iterative and (self.learning_rate is None or self.epochs is None):
            raise ValueError(f"{self.model_kind.value} needs a learning rate and an epoch count")
        if not iterative and (self.learning_rate is not None or self.epochs is not None):
            raise ValueError("ELM cells take no learning rate or epochs")

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.testing_id)

    def sort_key(self):
        return (self.city, SEASON_ORDER.index(self.season), self.testing_id, self.model_kind.rank,
                self.learning_rate or 0.0, self.epochs or 0)

    def cell_seed(self) -> int:
        return derive_seed(self.base_seed, self.city, self.season.name, self.testing_id,
                           self.model_kind.value, repr(self.learning_rate))


@dataclass(frozen=True)
class ResultRow:
    spec: ExperimentSpec
    metrics: MetricReport
    final_train_loss: float
    n_train: int
    n_test: int
    train_seconds: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class CellFailure:
    spec: ExperimentSpec
    kind: str  # "data" | "divergence" | "metric"
    message: str


@dataclass(frozen=True)
class GridConfig:
    split: SplitConfig = SplitConfig()
    seasons: tuple[Season, ...] = tuple(Season)
    testings: tuple[int, ...] = (3, 4)
    models: tuple[ModelKind, ...] = tuple(ModelKind)
    ann_lrs: tuple[float, ...] = ANN_LR_GRID
    lstm_lrs: tuple[float, ...] = LSTM_LR_GRID
    epochs: tuple[int, ...] = EPOCH_GRID
    epoch_scale: float = 1.0
    base_seed: int = 0
    ff_hidden: int = 3
    lstm_hidden: int = 4
    elm_hidden: int = 20
    per_season_training: bool = True
    temperature_offset: float = KELVIN_OFFSET
    humidity_offset: float = 0.0

    def lrs_for(self, kind: ModelKind) -> tuple[float, ...]:
        if kind.is_feedforward:
            return self.ann_lrs
        if kind.is_recurrent:
            return self.lstm_lrs
        return (None,)

    def to_dict(self) -> dict:
        return {
            "train_start": self.split.train_start.isoformat(),
            "train_end": self.split.train_end.isoformat(),
            "test_end": self.split.test_end.isoformat(),
            "seasons": [s.name for s in self.seasons],
            "testings": list(self.testings),
            "models": [m.value for m in self.models],
            "ann_lrs": list(self.ann_lrs),
            "lstm_lrs": list(self.lstm_lrs),
            "epochs": list(self.epochs),
            "epoch_scale": self.epoch_scale,
            "base_seed": self.base_seed,
            "ff_hidden": self.ff_hidden,
            "lstm_hidden": self.lstm_hidden,
            "elm_hidden": self.elm_hidden,
            "per_season_training": self.per_season_training,
            "temperature_offset": self.temperature_offset,
            "humidity_offset": self.humidity_offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        d = dict(d)
        unknown = set(d) - set(cls().to_dict())
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        split = SplitConfig(**{k: dt.date.fromisoformat(d.pop(k))
                               for k in ("train_start", "train_end", "test_end") if k in d})
        conv = {
            "seasons": lambda v: tuple(Season.parse(s) for s in v),
            "testings": lambda v: tuple(int(t) for t in v),
            "models": lambda v: tuple(ModelKind.parse(m) for m in v),
            "ann_lrs": lambda v: tuple(float(x) for x in v),
            "lstm_lrs": lambda v: tuple(float(x) for x in v),
            "epochs": lambda v: tuple(int(x) for x in v),
        }
        kw = {k: conv[k](v) if k in conv else v for k, v in d.items()}
        return cls(split=split, **kw)

    @classmethod
    def load(cls, path) -> "GridConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def train_config(self, spec: ExperimentSpec) -> TrainConfig:
        return TrainConfig(spec.learning_rate, spec.epochs, seed=spec.cell_seed(),
                           epoch_scale=self.epoch_scale, ff_hidden=self.ff_hidden,
                           lstm_hidden=self.lstm_hidden)


def data_digest(series: RawSeries) -> str:
    h = hashlib.sha256()
    h.update(series.city.encode())
    for arr in (series.dates.astype(np.int64), series.temperature, series.humidity):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _contiguous_runs(series: RawSeries) -> list[RawSeries]:
    if len(series) == 0:
        return []
    cuts = np.flatnonzero(np.diff(series.dates.astype(np.int64)) != 1) + 1
    bounds = [0, *cuts.tolist(), len(series)]
    return [series.subset(slice(a, b)) for a, b in zip(bounds[:-1], bounds[1:])]


def prepare_samples(data: RawSeries, season: Season, testing_id: int, config: GridConfig = GridConfig()):
    """Train and test SampleSets for one (city, season, testing) slice."""
    spec = WindowSpec(testing_id)
    train, test = chronological_split(data, config.split)
    train_segs = seasonal_runs(train, season) if config.per_season_training else _contiguous_runs(train)
    test_segs = seasonal_runs(test, season)
    if not train_segs or not test_segs:
        raise DataError(f"{data.city}: no {season.name} data in the train or test period")
    norm = NormalizationParams.fit(train_segs)
    tr = build_windows(train_segs, spec, norm)
    te = build_windows(test_segs, spec, norm)
    if len(tr) < spec.lag_count + 2:
        raise DataError(f"{data.city} {season.name} testing {testing_id}: only {len(tr)} training windows")
    if len(te) == 0:
        raise DataError(f"{data.city} {season.name} testing {testing_id}: no test windows")
    return tr, te


def _score(model, test, config: GridConfig) -> MetricReport:
    return evaluate(model, test, temperature_offset=config.temperature_offset,
                    humidity_offset=config.humidity_offset)


def _elm_row(spec, train, test, config):
    t0 = time.perf_counter()
    ens = elm_ensemble_fit(train, config.elm_hidden, elm_member_seeds(spec.cell_seed(), config.epochs))
    from .models import predict
    fitted = predict(ens, train.inputs, train.spec)
    loss = float(np.mean((fitted - train.targets) ** 2))
    return ResultRow(spec, _score(ens, test, config), loss, len(train), len(test),
                     time.perf_counter() - t0), ens


def run_experiment(spec: ExperimentSpec, data: RawSeries, config: GridConfig = GridConfig(),
                   return_model: bool = False):
    """Train and score one grid cell. Raises DataError or DivergenceError."""
    train, test = prepare_samples(data, spec.season, spec.testing_id, config)
    if spec.model_kind is ModelKind.ELM:
        row, model = _elm_row(spec, train, test, config)
    else:
        tc = config.train_config(spec)
        (cp,) = train_checkpoints(spec.model_kind, train, tc, [tc.effective_epochs])
        model = cp.params
        row = ResultRow(spec, _score(model, test, config), cp.history.final, len(train), len(test),
                        cp.seconds)
    return (row, model) if return_model else row


def persistence_report(data: RawSeries, season: Season, testing_id: int,
                       config: GridConfig = GridConfig()) -> MetricReport:
    """Scores of the 'tomorrow equals today' forecast on the test windows."""
    _, test = prepare_samples(data, season, testing_id, config)
    offset = config.temperature_offset if test.spec.target_kind == "temperature" else config.humidity_offset
    return metric_report(test.raw_targets, test.persistence_forecast(), offset)


def grid_specs(cities, config: GridConfig) -> list[ExperimentSpec]:
    specs = []
    for city in cities:
        for season in config.seasons:
            for tid in config.testings:
                for kind in config.models:
                    if kind is ModelKind.ELM:
                        specs.append(ExperimentSpec(city, season, tid, kind, base_seed=config.base_seed))
                        continue
                    for lr in config.lrs_for(kind):
                        for ep in config.epochs:
                            specs.append(ExperimentSpec(city, season, tid, kind, lr, ep, config.base_seed))
    return sorted(specs, key=ExperimentSpec.sort_key)


def _failure(spec, exc) -> CellFailure:
    kind = {DataError: "data", DivergenceError: "divergence", MetricError: "metric"}.get(type(exc), "error")
    return CellFailure(spec, kind, str(exc))


def _run_group(specs: list[ExperimentSpec], data: RawSeries, config: GridConfig):
    """Cells differing only in epoch count, trained as one run with checkpoints."""
    first = specs[0]
    try:
        train, test = prepare_samples(data, first.season, first.testing_id, config)
    except DataError as exc:
        return [_failure(s, exc) for s in specs]
    if first.model_kind is ModelKind.ELM:
        try:
            return [_elm_row(first, train, test, config)[0]]
        except (ValueError, np.linalg.LinAlgError) as exc:
            return [_failure(first, exc)]
    tc = config.train_config(first)
    marks = {s: scaled_epochs(s.epochs, config.epoch_scale) for s in specs}
    try:
        cps = train_checkpoints(first.model_kind, train, tc, sorted(set(marks.values())))
        failure = None
    except DivergenceError as exc:
        cps, failure = exc.completed, exc
    by_epoch = {cp.epochs: cp for cp in cps}
    out = []
    for s in specs:
        cp = by_epoch.get(marks[s])
        if cp is None:
            out.append(_failure(s, failure))
            continue
        try:
            out.append(ResultRow(s, _score(cp.params, test, config), cp.history.final,
                                 len(train), len(test), cp.seconds))
        except MetricError as exc:
            out.append(_failure(s, exc))
    return out


def _groups(specs):
    groups = {}
    for s in specs:
        key = (s.city, s.season, s.testing_id, s.model_kind, s.learning_rate)
        groups.setdefault(key, []).append(s)
    return list(groups.values())


def run_grid(cities, data_per_city: dict[str, RawSeries], config: GridConfig = GridConfig(),
             jobs: int = 1) -> list:
    """Every grid cell as a ResultRow or CellFailure, sorted by spec."""
    specs = grid_specs(cities, config)
    groups = _groups(specs)
    results = []
    if jobs <= 1:
        for g in groups:
            results.extend(_run_group(g, data_per_city[g[0].city], config))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_group, g, data_per_city[g[0].city], config) for g in groups]
            for fut in futures:
                results.extend(fut.result())
    results.sort(key=lambda r: r.spec.sort_key())
    if len(results) != len(specs):
        raise RuntimeError(f"cell count mismatch: {len(results)} results for {len(specs)} cells")
    return results


# ------------------------------------------------------------------ reports

@dataclass(frozen=True)
class BestEntry:
    testing_id: int
    city: str
    season: Season
    value: float
    row: ResultRow


def _tie_key(row: ResultRow):
    s = row.spec
    return (s.model_kind.rank, s.learning_rate or 0.0, s.epochs or 0)


def best_per_cell(rows, metric_name: str) -> list[BestEntry]:
    """Lowest ``metric_name`` per (testing, city, season); ties go to the
    earlier model (ANN < DNN < ELM < LSTM < LSTM_PC), then lower lr, then
    fewer epochs."""
    if metric_name not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric_name!r}")
    cells = {}
    for r in rows:
        if isinstance(r, ResultRow):
            key = (r.spec.testing_id, r.spec.city, SEASON_ORDER.index(r.spec.season))
            cells.setdefault(key, []).append(r)
    out = []
    for key in sorted(cells):
        best = min(cells[key], key=lambda r: (getattr(r.metrics, metric_name), _tie_key(r)))
        out.append(BestEntry(key[0], key[1], SEASON_ORDER[key[2]], getattr(best.metrics, metric_name), best))
    return out


GRID_COLUMNS = ("city", "season", "testing_id", "model", "learning_rate", "epochs", "base_seed",
                "status", "rmse", "mape", "mae", "theils_u", "metric_offset", "final_train_loss",
                "n_train", "n_test", "error")


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _spec_fields(s: ExperimentSpec) -> dict:
    return {"city": s.city, "season": s.season.name, "testing_id": str(s.testing_id),
            "model": s.model_kind.value, "learning_rate": _num(s.learning_rate),
            "epochs": "" if s.epochs is None else str(s.epochs), "base_seed": str(s.base_seed)}


def _grid_record(r) -> dict:
    rec = dict.fromkeys(GRID_COLUMNS, "")
    rec.update(_spec_fields(r.spec))
    if isinstance(r, ResultRow):
        m = r.metrics
        rec.update(status="ok", rmse=_num(m.rmse), mape=_num(m.mape), mae=_num(m.mae),
                   theils_u=_num(m.theils_u), metric_offset=_num(m.offset),
                   final_train_loss=_num(r.final_train_loss), n_train=str(r.n_train), n_test=str(r.n_test))
    else:
        rec.update(status=f"failed:{r.kind}", error=r.message)
    return rec


def _parse_record(rec: dict):
    spec = ExperimentSpec(rec["city"], Season.parse(rec["season"]), int(rec["testing_id"]),
                          ModelKind.parse(rec["model"]),
                          float(rec["learning_rate"]) if rec["learning_rate"] else None,
                          int(rec["epochs"]) if rec["epochs"] else None, int(rec["base_seed"]))
    if rec["status"] == "ok":
        m = MetricReport(float(rec["rmse"]), float(rec["mape"]), float(rec["mae"]),
                         float(rec["theils_u"]), float(rec["metric_offset"]))
        return ResultRow(spec, m, float(rec["final_train_loss"]), int(rec["n_train"]), int(rec["n_test"]),
                         float(rec.get("train_seconds") or 0.0))
    return CellFailure(spec, rec["status"].split(":", 1)[1], rec["error"])


def _write_csv(path: Path, header, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        w.writerows(records)


def parse_grid_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return [_parse_record(rec) for rec in csv.DictReader(fh)]


def _unit(metric: str, testing_id: int) -> str:
    if metric == "mape":
        return "%"
    if metric == "theils_u":
        return "ratio"
    return "degC" if WindowSpec(testing_id).target_kind == "temperature" else "%RH"


SUMMARY_COLUMNS = ("testing_id", "city", "season", "value", "unit", "model", "learning_rate", "epochs")
FIG_COLUMNS = ("testing_id", "city") + tuple(s.name.lower() for s in SEASON_ORDER)


def emit_report(rows, out_dir, manifest: "RunManifest | None" = None) -> list[Path]:
    """Write grid.csv, summary_<metric>.csv, fig_<metric>.csv and optionally manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(rows, key=lambda r: r.spec.sort_key())
    written = [out / "grid.csv"]
    _write_csv(written[0], GRID_COLUMNS, [_grid_record(r) for r in rows])
    for metric in METRIC_NAMES:
        best = best_per_cell(rows, metric)
        summary = [{"testing_id": b.testing_id, "city": b.city, "season": b.season.name, "value": _num(b.value),
                    "unit": _unit(metric, b.testing_id), "model": b.row.spec.model_kind.value,
                    "learning_rate": _num(b.row.spec.learning_rate),
                    "epochs": "" if b.row.spec.epochs is None else b.row.spec.epochs} for b in best]
        _write_csv(out / f"summary_{metric}.csv", SUMMARY_COLUMNS, summary)
        fig = {}
        for b in best:
            rec = fig.setdefault((b.testing_id, b.city), dict.fromkeys(FIG_COLUMNS, ""))
            rec.update(testing_id=b.testing_id, city=b.city)
            rec[b.season.name.lower()] = _num(b.value)
        _write_csv(out / f"fig_{metric}.csv", FIG_COLUMNS, [fig[k] for k in sorted(fig)])
        written += [out / f"summary_{metric}.csv", out / f"fig_{metric}.csv"]
    if manifest is not None:
        path = out / "manifest.json"
        manifest.write(path)
        written.append(path)
    return written


@dataclass
class RunManifest:
    config: GridConfig
    data_digests: dict[str, str]
    rows: list
    code_version: str = __version__
    timestamp: str = ""

    def to_dict(self) -> dict:
        recs = []
        for r in sorted(self.rows, key=lambda r: r.spec.sort_key()):
            rec = _grid_record(r)
            if isinstance(r, ResultRow):
                rec["train_seconds"] = _num(r.train_seconds)
            recs.append(rec)
        return {
            "format": "meteonn-manifest/1",
            "caption": REPORT_CAPTION,
            "footnote": REPORT_FOOTNOTE,
            "code_version": self.code_version,
            "timestamp": self.timestamp,
            "config_digest": self.config.digest(),
            "config": self.config.to_dict(),
            "base_seed": self.config.base_seed,
            "data_digests": dict(sorted(self.data_digests.items())),
            "cell_count": len(recs),
            "failed_count": sum(not isinstance(r, ResultRow) for r in self.rows),
            "rows": recs,
        }

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if d.get("format") != "meteonn-manifest/1":
            raise ValueError(f"{path}: not a run manifest")
        return cls(GridConfig.from_dict(d["config"]), d["data_digests"],
                   [_parse_record(rec) for rec in d["rows"]], d["code_version"], d["timestamp"])


def make_manifest(config: GridConfig, data_per_city: dict[str, RawSeries], rows) -> RunManifest:
    return RunManifest(config, {c: data_digest(s) for c, s in data_per_city.items()}, list(rows),
                       timestamp=dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"))
