"""Run configuration, report assembly and output files.

A run is described by a flat JSON config; relative paths are resolved
against the config file's directory. Stages run in a fixed order and the
JSON output depends only on the inputs and the config (the timestamp is
pinned in fixed-clock mode).
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import io
import json
import math
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .descriptive import (
    ContingencyTable3,
    ExpertiseAssignment,
    build_jel_network,
    expertise_weights,
    export_network,
    extract_keywords,
    field_correlation,
    keyword_overlap,
    load_stopwords,
    mosaic_layout,
    read_corpus,
)
from .descriptive.network import NETWORK_FORMATS
from .design import ModelSpec
from .exceptions import ConfigurationError, CrcEvalError, ParseError
from .indicators import indicator_report, read_phd, read_publications, read_staff
from .linear import FitResult, fit_fe
from .panel import Panel, log_transform, read_panel
from .poisson import FepFit, fit_fep

__all__ = [
    "SECTIONS",
    "CONFIG_KEYS",
    "RunConfig",
    "YearEffect",
    "emit_year_effect_series",
    "run_report",
    "read_pi_assignments",
    "NonConvergence",
]

SECTIONS = ("fe", "fe_lag", "fep", "fep_lag", "indicators", "network", "keywords", "mosaic")
FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"

CONFIG_KEYS = {
    "panel_csv": "panel CSV (unit, year, n_dp, staff_costs, travel_costs)",
    "publications_csv": "publication records CSV",
    "staff_csv": "research staff CSV (unit_id, year, fte, role)",
    "phd_csv": "defended PhD records CSV",
    "pi_csv": "PI expertise CSV (person, project, jel_codes, years, rank)",
    "proposals": "proposal corpus: directory of .txt files or one document per line",
    "abstracts": "abstract corpus, same conventions as proposals",
    "stopwords": "stopword file (default: bundled English list)",
    "schema": "object mapping panel roles to CSV column names",
    "dependent": "dependent variable (default n_dp)",
    "regressors": "list of regressors (default log_staff_costs, log_travel_costs)",
    "log_columns": "columns replaced by log_<name> before fitting (default staff_costs, travel_costs)",
    "base_year": "base year for year dummies (default: earliest year)",
    "time_dummies": "include year dummies (default true)",
    "lags": "fit-fe/fit-fep: add first lags of dependent and regressors (default false)",
    "sections": f"report sections to produce, subset of {list(SECTIONS)}",
    "network_format": f"network export format, one of {list(NETWORK_FORMATS)} (default json)",
    "keywords_k": "number of top keywords per corpus (default 75)",
    "ra_reading": "research-activity reading: average (default) or total",
    "fep_tol": "Newton gradient tolerance (default 1e-8)",
    "fep_max_iter": "Newton iteration cap (default 100)",
    "output_dir": "output directory when --out is not given",
}


class NonConvergence(CrcEvalError):
    """Raised by the CLI layer when a Poisson fit did not converge."""


@dataclass(frozen=True)
class RunConfig:
    panel_csv: Path | None = None
    publications_csv: Path | None = None
    staff_csv: Path | None = None
    phd_csv: Path | None = None
    pi_csv: Path | None = None
    proposals: Path | None = None
    abstracts: Path | None = None
    stopwords: Path | None = None
    schema: dict = field(default_factory=dict)
    dependent: str = "n_dp"
    regressors: tuple = ("log_staff_costs", "log_travel_costs")
    log_columns: tuple = ("staff_costs", "travel_costs")
    base_year: int | None = None
    time_dummies: bool = True
    lags: bool = False
    sections: tuple = SECTIONS
    network_format: str = "json"
    keywords_k: int = 75
    ra_reading: str = "average"
    fep_tol: float = 1e-8
    fep_max_iter: int = 100
    output_dir: Path | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    _PATHS = ("panel_csv", "publications_csv", "staff_csv", "phd_csv", "pi_csv",
              "proposals", "abstracts", "stopwords", "output_dir")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | str = ".") -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigurationError("config must be a JSON object")
        unknown = sorted(set(doc) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigurationError(f"unknown config keys: {unknown}")
        base_dir = Path(base_dir)
        kw: dict[str, Any] = {}
        for key, value in doc.items():
            if key in cls._PATHS:
                kw[key] = None if value is None else (base_dir / value)
            elif key in ("regressors", "log_columns", "sections"):
                if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                    raise ConfigurationError(f"{key} must be a list of strings")
                kw[key] = tuple(value)
            elif key == "schema":
                if not isinstance(value, dict):
                    raise ConfigurationError("schema must be an object")
                kw[key] = dict(value)
            else:
                kw[key] = value
        cfg = cls(**kw, raw=dict(doc))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"config {path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc, path.parent)

    def required_inputs(self, sections: Sequence[str]) -> set[str]:
        need = set()
        for s in sections:
            if s in ("fe", "fe_lag", "fep", "fep_lag"):
                need.add("panel_csv")
            elif s in ("indicators", "network"):
                need.add("publications_csv")
            elif s == "keywords":
                need.update(("proposals", "abstracts"))
            elif s == "mosaic":
                need.add("phd_csv")
        return need

    def validate(self, sections: Sequence[str] | None = None) -> None:
        sections = self.sections if sections is None else sections
        bad = [s for s in sections if s not in SECTIONS]
        if bad:
            raise ConfigurationError(f"unknown sections {bad}; choose from {list(SECTIONS)}")
        if len(set(sections)) != len(sections):
            raise ConfigurationError("sections must not repeat")
        if not isinstance(self.dependent, str) or not self.dependent:
            raise ConfigurationError("exactly one dependent variable (a column name) is required")
        if self.network_format not in NETWORK_FORMATS:
            raise ConfigurationError(f"network_format must be one of {NETWORK_FORMATS}")
        if not isinstance(self.keywords_k, int) or self.keywords_k < 1:
            raise ConfigurationError("keywords_k must be a positive integer")
        if self.ra_reading not in ("average", "total"):
            raise ConfigurationError("ra_reading must be 'average' or 'total'")
        for key in self.required_inputs(sections):
            if getattr(self, key) is None:
                raise ConfigurationError(f"sections {list(sections)} require config key {key!r}")
        for key in self._PATHS:
            p = getattr(self, key)
            if key != "output_dir" and p is not None and not p.exists():
                raise ConfigurationError(f"{key}: path does not exist: {p}")

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def model_spec(self, include_lags: bool) -> ModelSpec:
        return ModelSpec(
            dependent=self.dependent,
            regressors=tuple(self.regressors),
            time_dummies=bool(self.time_dummies),
            base_year=self.base_year,
            include_lags=include_lags,
        )


# -- year effects -------------------------------------------------------------------


@dataclass(frozen=True)
class YearEffect:
    year: int
    estimate: float | None
    std_error: float | None
    status: str  # base | estimated | omitted

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def emit_year_effect_series(fit: FitResult | FepFit) -> list[YearEffect]:
    """Year-dummy coefficients in year order, with the base year and omitted years flagged."""
    if fit.base_year is None:
        raise ConfigurationError("fit has no year dummies")
    out = [YearEffect(fit.base_year, 0.0, None, "base")]
    for year in fit.dummy_years:
        name = f"year_{year}"
        if name in fit.coefficients:
            out.append(YearEffect(year, fit.coefficients[name], fit.std_errors[name], "estimated"))
        else:
            out.append(YearEffect(year, None, None, "omitted"))
    return sorted(out, key=lambda e: e.year)


# -- pipeline -----------------------------------------------------------------------


def read_pi_assignments(path) -> list[ExpertiseAssignment]:
    """CSV rows ``person, project, jel_codes, years, rank``; years as ``2005-2008`` or ``2005;2006``."""
    text = Path(path).read_text(encoding="utf-8-sig")
    reader = csv.DictReader(io.StringIO(text))
    required = ("person", "project", "jel_codes", "years")
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
        raise ParseError(f"{path}: header must contain {list(required)}")
    by_person: dict = {}
    for line, row in enumerate(reader, start=2):
        codes = [c for c in row["jel_codes"].replace(",", ";").replace(" ", ";").split(";") if c]
        years_raw = row["years"].strip()
        try:
            if "-" in years_raw:
                lo, hi = (int(v) for v in years_raw.split("-"))
                years = list(range(lo, hi + 1))
            else:
                years = [int(v) for v in years_raw.split(";") if v]
        except ValueError:
            raise ParseError(f"{path} line {line}: cannot parse years {years_raw!r}") from None
        person = row["person"].strip()
        entry = by_person.setdefault(person, {"rank": row.get("rank") or "full_professor", "rows": []})
        entry["rows"].append((row["project"].strip(), codes, years))
    out = []
    for person in sorted(by_person):
        entry = by_person[person]
        for project, codes, years in entry["rows"]:
            out.append(ExpertiseAssignment(person, {project: codes}, years, entry["rank"]))
    return out


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


class _Stage:
    """Prefix errors raised inside a pipeline stage with the stage name."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if exc is not None and isinstance(exc, CrcEvalError) and not str(exc).startswith("[stage"):
            exc.args = (f"[stage {self.name}] {exc}",) + exc.args[1:]
        return False


def load_model_panel(config: RunConfig) -> Panel:
    with _Stage("ingest"):
        panel = read_panel(config.panel_csv, config.schema or None)
    with _Stage("transform"):
        if config.log_columns:
            panel = log_transform(panel, list(config.log_columns))
    return panel


def _fit_section(panel: Panel, config: RunConfig, kind: str, lags: bool) -> tuple[dict, FitResult | FepFit]:
    spec = config.model_spec(lags)
    with _Stage(f"estimate:{kind}{'_lag' if lags else ''}"):
        if kind == "fe":
            fit = fit_fe(panel, spec)
        else:
            fit = fit_fep(panel, spec, tol=config.fep_tol, max_iter=config.fep_max_iter)
    doc = fit.to_dict()
    doc["spec"] = spec.to_dict()
    doc["year_effects"] = [e.to_dict() for e in emit_year_effect_series(fit)] if fit.base_year is not None else []
    return doc, fit


def _unit_costs(panel: Panel) -> dict[str, float]:
    costs: dict[str, float] = {}
    if "staff_costs" not in panel.columns or "travel_costs" not in panel.columns:
        return costs
    total = panel.column("staff_costs") + panel.column("travel_costs")
    for u, c in zip(panel.unit_ids, total):
        costs[u] = costs.get(u, 0.0) + float(c)
    return costs


def year_effects_csv(sections: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "year", "estimate", "std_error", "status"])
    for name, doc in sections.items():
        for e in doc.get("year_effects", []) if isinstance(doc, dict) else []:
            w.writerow([name, e["year"], "" if e["estimate"] is None else repr(e["estimate"]),
                        "" if e["std_error"] is None else repr(e["std_error"]), e["status"]])
    return buf.getvalue()


def keywords_csv(doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["corpus", "rank", "term", "frequency"])
    for corpus in ("proposals", "abstracts"):
        for rank, (term, freq) in enumerate(doc[corpus], start=1):
            w.writerow([corpus, rank, term, freq])
    return buf.getvalue()


def mosaic_csv(rects: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    dims = list(rects[0]["labels"]) if rects else []
    w.writerow([*dims, "x", "y", "width", "height", "count", "area"])
    for r in rects:
        w.writerow([*(r["labels"][d] for d in dims), repr(r["x"]), repr(r["y"]), repr(r["width"]),
                    repr(r["height"]), r["count"], repr(r["area"])])
    return buf.getvalue()


def build_sections(config: RunConfig, sections: Sequence[str], table_format: str | None = None) -> tuple[dict, dict, list]:
    """Compute the requested sections. Returns (section docs, output files, non-converged fits).

    ``table_format`` (``json`` or ``csv``) overrides the default file format of
    the keyword and mosaic tables.
    """
    docs: dict[str, Any] = {}
    files: dict[str, str | bytes] = {}
    nonconverged = []
    panel = None
    if any(s in sections for s in ("fe", "fe_lag", "fep", "fep_lag")) or (
        "indicators" in sections and config.panel_csv is not None
    ):
        panel_raw = None
        panel = load_model_panel(config)
        if "indicators" in sections:
            with _Stage("ingest"):
                panel_raw = read_panel(config.panel_csv, config.schema or None)

    for name in ("fe", "fe_lag", "fep", "fep_lag"):
        if name in sections:
            doc, fit = _fit_section(panel, config, name.split("_")[0], name.endswith("_lag"))
            docs[name] = doc
            if isinstance(fit, FepFit) and not fit.converged:
                nonconverged.append(name)

    pubs = None
    if "indicators" in sections or "network" in sections:
        with _Stage("ingest:publications"):
            pubs = read_publications(config.publications_csv.read_bytes())

    if "indicators" in sections:
        with _Stage("describe:indicators"):
            staff = read_staff(config.staff_csv.read_bytes()) if config.staff_csv else []
            phd = read_phd(config.phd_csv.read_bytes()) if config.phd_csv else []
            costs = _unit_costs(panel_raw) if config.panel_csv else None
            docs["indicators"] = indicator_report(pubs, staff, phd, costs, config.ra_reading)
        files["indicators.json"] = dumps(docs["indicators"])

    if "network" in sections:
        with _Stage("describe:network"):
            graph = build_jel_network(pubs)
            doc = graph.summary()
            if config.pi_csv:
                weights = expertise_weights(read_pi_assignments(config.pi_csv))
                pi_totals = weights.jel_totals()
                doc["expertise"] = {"jel_pi_years": pi_totals, "by_rank": weights.by_rank()}
                try:
                    doc["expertise"]["correlation_dp_pi"] = field_correlation(graph.jel_degree, pi_totals)
                except CrcEvalError:
                    doc["expertise"]["correlation_dp_pi"] = None
            docs["network"] = doc
            files[f"network.{config.network_format}"] = export_network(graph, config.network_format)

    if "keywords" in sections:
        with _Stage("describe:keywords"):
            stop = load_stopwords(config.stopwords)
            k = config.keywords_k
            prop = extract_keywords(read_corpus(config.proposals), k, stop)
            abst = extract_keywords(read_corpus(config.abstracts), k, stop)
            n = min(len(prop), len(abst))
            doc = {
                "k": k,
                "proposals": [list(t) for t in prop],
                "abstracts": [list(t) for t in abst],
                "overlap": keyword_overlap(prop[:n], abst[:n]) if n else None,
            }
            docs["keywords"] = doc
            if table_format == "json":
                files["keywords.json"] = dumps(doc)
            else:
                files["keywords.csv"] = keywords_csv(doc)

    if "mosaic" in sections:
        with _Stage("describe:mosaic"):
            table = ContingencyTable3.from_phd_records(read_phd(config.phd_csv.read_bytes()))
            rects = [r.to_dict() for r in mosaic_layout(table)]
            academia = sum(r["area"] for r in rects if r["labels"]["sector"] == "academia")
            docs["mosaic"] = {"total": table.total, "rectangles": rects, "academia_area": academia}
            if table_format == "csv":
                files["mosaic.csv"] = mosaic_csv(rects)
            else:
                files["mosaic.json"] = dumps(docs["mosaic"])
    return docs, files, nonconverged


def _write_atomic(out_dir: Path, files: dict[str, str | bytes]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        for name, content in files.items():
            data = content.encode("utf-8") if isinstance(content, str) else content
            (tmp / name).write_bytes(data)
        for name in files:
            (tmp / name).replace(out_dir / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def run_report(config: RunConfig, out_dir, sections: Sequence[str] | None = None,
               fixed_clock: bool = False, table_format: str | None = None) -> tuple[dict, list]:
    """Run the requested sections and write ``report.json`` plus per-section files.

    Nothing is written if any stage fails. Returns the report document and the
    names of Poisson sections that did not converge.
    """
    sections = tuple(config.sections if sections is None else sections)
    config.validate(sections)
    docs, files, nonconverged = build_sections(config, sections, table_format)
    fe = {k: docs[k] for k in ("fe", "fe_lag") if k in docs}
    fep = {k: docs[k] for k in ("fep", "fep_lag") if k in docs}
    if fe:
        files["fit_fe.json"] = dumps(fe)
    if fep:
        files["fit_fep.json"] = dumps(fep)
    if fe or fep:
        files["year_effects.csv"] = year_effects_csv({**fe, **fep})
    stamp = FIXED_TIMESTAMP if fixed_clock else dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    report = {
        "metadata": {
            "generated_at": stamp,
            "config_hash": config.config_hash(),
            "version": __version__,
            "sections": list(sections),
        },
        "sections": {s: docs[s] for s in sections},
    }
    files["report.json"] = dumps(report)
    _write_atomic(Path(out_dir), files)
    return report, nonconverged
