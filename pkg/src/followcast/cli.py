"""Command-line interface: one subcommand per pipeline stage.

Every subcommand writes its artifacts plus ``manifest-<command>.json`` into
``--out``. The manifest records resolved arguments, settings, input and output
hashes and library versions, and ``followcast rerun`` replays it.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import os
import platform
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .features import CORE_FEATURES, extract, extract_core, feature_matrix, fit_scaler, schema_for
from .ingest import (
    CrawlContext,
    LabeledProfile,
    RawProfile,
    SnapshotError,
    describe_changes,
    filter_profiles,
    join_snapshots,
    read_labeled,
    read_snapshot,
    stratified_split,
    write_snapshot,
)
from .lexicon import (
    Group,
    LexiconError,
    NameLexicon,
    WordList,
    assign_group,
    load_default_lexicon,
    load_default_wordlist,
)
from .logreg import LogitError, fit_logit, nagelkerke_r2, wald_table
from .models.cv import FAMILIES, grid_search, write_cv_report
from .router import (
    CvConfig,
    RouterError,
    classify_many,
    evaluate_global_baseline,
    evaluate_random_baseline,
    evaluate_router,
    load_router,
    partition_by_group,
    save_router,
    train_global_baseline,
    train_router,
)
from .stats import describe, format_p, histogram, one_way_anova, tukey_kramer
from .synth import POPULATION_PROPORTIONS, SCENARIOS, GeneratorConfig, generate, scenario_coefficients, write_synth

log = logging.getLogger("followcast")

MANIFEST_VERSION = 1


class CliError(Exception):
    """Reported as a one-line diagnostic with exit code 1."""


# --- configuration -----------------------------------------------------------

@dataclass
class Settings:
    seed: int = 0
    split_ratio: float = 0.5
    k: int = 10
    repeats: int = 5
    grids: dict = field(default_factory=dict)
    lexicon: str | None = None
    wordlist: str | None = None
    threads: int = 1

    def validate(self) -> None:
        if self.k < 2:
            raise CliError(f"cv k must be >= 2, got {self.k}")
        if self.repeats < 1:
            raise CliError(f"cv repeats must be >= 1, got {self.repeats}")
        if not 0.0 < self.split_ratio < 1.0:
            raise CliError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.threads < 1:
            raise CliError(f"threads must be >= 1, got {self.threads}")
        for fname, grid in self.grids.items():
            if fname not in FAMILIES:
                raise CliError(f"unknown model family in grid: {fname!r}")
            unknown = set(grid) - set(FAMILIES[fname].defaults)
            if unknown:
                raise CliError(f"grid.{fname}: unknown parameters {sorted(unknown)}")
        for path in (self.lexicon, self.wordlist):
            if path is not None and not Path(path).is_file():
                raise CliError(f"file not found: {path}")

    def recorded(self) -> dict:
        """Settings that determine results (thread count does not)."""
        d = asdict(self)
        del d["threads"]
        return d


def _parse_scalar(text: str) -> Any:
    t = text.strip()
    if t.lower() in ("true", "yes"):
        return True
    if t.lower() in ("false", "no"):
        return False
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def parse_config(text: str, source: str = "<config>") -> dict:
    """Read the INI-style run configuration into plain dicts.

    Sections ``[run]``, ``[cv]`` and ``[paths]`` hold scalars; each
    ``[grid.<family>]`` section maps a parameter to a comma-separated list.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise CliError(f"{source}: {exc}".replace("\n", " ")) from None
    out: dict[str, Any] = {"run": {}, "cv": {}, "paths": {}, "grids": {}}
    known = {"run": {"seed", "split_ratio"}, "cv": {"k", "repeats"}, "paths": {"lexicon", "wordlist"}}
    for section in cp.sections():
        if section.startswith("grid."):
            out["grids"][section[5:]] = {
                key: [_parse_scalar(v) for v in value.split(",") if v.strip()] for key, value in cp[section].items()
            }
        elif section in known:
            for key, value in cp[section].items():
                if key not in known[section]:
                    raise CliError(f"{source}: unknown key {key!r} in [{section}]")
                out[section][key] = value.strip() if section == "paths" else _parse_scalar(value)
        else:
            raise CliError(f"{source}: unknown section [{section}]")
    return out


def default_config_text() -> str:
    return resources.files("followcast").joinpath("data", "default.ini").read_text(encoding="utf-8")


def resolve_settings(args: argparse.Namespace) -> tuple[Settings, str]:
    """Merge the config file (or the bundled default) with command-line flags."""
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        base = path.parent
    else:
        text = default_config_text()
        base = Path.cwd()
    cfg = parse_config(text, str(args.config or "default.ini"))
    s = Settings()
    s.seed = int(cfg["run"].get("seed", s.seed))
    s.split_ratio = float(cfg["run"].get("split_ratio", s.split_ratio))
    s.k = int(cfg["cv"].get("k", s.k))
    s.repeats = int(cfg["cv"].get("repeats", s.repeats))
    s.grids = cfg["grids"]
    for key in ("lexicon", "wordlist"):
        value = cfg["paths"].get(key)
        if value:
            setattr(s, key, str((base / value).resolve()))
    if args.seed is not None:
        s.seed = args.seed
    if getattr(args, "lexicon", None):
        s.lexicon = str(Path(args.lexicon).resolve())
    if getattr(args, "wordlist", None):
        s.wordlist = str(Path(args.wordlist).resolve())
    s.threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    s.validate()
    return s, text


# --- helpers -----------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resources(s: Settings) -> tuple[NameLexicon, WordList]:
    try:
        lexicon = NameLexicon.from_csv(s.lexicon) if s.lexicon else load_default_lexicon()
        words = WordList.from_file(s.wordlist) if s.wordlist else load_default_wordlist()
    except OSError as exc:
        raise CliError(f"cannot read lexicon resources: {exc}") from None
    return lexicon, words


def _require(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input file not found: {path}")
    return p


def _is_labeled(path: Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                return False
            if "__snapshot__" in obj:
                continue
            return "followers_second" in obj
    return False


def _load_labeled(path: str) -> tuple[list[LabeledProfile], CrawlContext]:
    p = _require(path)
    try:
        records, crawl_date = read_labeled(p)
    except (json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"{path}: not a labeled file ({exc})") from None
    if crawl_date is None:
        raise CliError(f"{path}: labeled file has no crawl_date header")
    return records, CrawlContext(crawl_date)


def _load_profiles(path: str, crawl_date: dt.date | None = None) -> tuple[list[RawProfile], CrawlContext | None, int]:
    p = _require(path)
    if _is_labeled(p):
        records, ctx = _load_labeled(path)
        return [r.profile for r in records], ctx, 0
    snap = read_snapshot(p, crawl_date)
    ctx = CrawlContext(snap.crawl_date) if snap.crawl_date else None
    return snap.profiles, ctx, snap.malformed


def _emit(key: str, value: Any) -> None:
    print(f"{key}={value}", file=sys.stderr)


def _fmt(x: float | None, digits: int = 3) -> str:
    return "absent" if x is None else f"{x:.{digits}f}"


def _text_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in [header] + rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(line.rstrip() for line in lines) + "\n"


def _csv_text(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x: float | None) -> str:
    """Full-precision CSV rendering; shortest repr round-trips exactly."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class Run:
    """Collects outputs of one subcommand and writes its manifest."""

    def __init__(self, command: str, out: Path, settings: Settings, arguments: dict, config_text: str):
        self.command = command
        self.out = out
        self.settings = settings
        self.arguments = arguments
        self.config_text = config_text
        self.inputs: list[Path] = []
        self.outputs: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def input(self, path: str | Path | None) -> None:
        if path is not None:
            self.inputs.append(Path(path))

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write(self, name: str, text: str) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return p

    def manifest(self) -> dict:
        return {
            "manifest_version": MANIFEST_VERSION,
            "command": self.command,
            "arguments": self.arguments,
            "settings": self.settings.recorded(),
            "config": self.config_text,
            "inputs": [{"path": str(p.resolve()), "sha256": _sha256(p)} for p in self.inputs],
            "outputs": [{"name": n, "sha256": _sha256(self.out / n)} for n in sorted(set(self.outputs))],
            "versions": {
                "followcast": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        }

    def finish(self) -> Path:
        p = self.out / f"manifest-{self.command}.json"
        p.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p


# --- subcommands -------------------------------------------------------------

def cmd_synth(args, s: Settings, run: Run) -> None:
    props = dict(POPULATION_PROPORTIONS) if args.proportions == "population" else {g: 1.0 / 3 for g in Group}
    cfg = GeneratorConfig(
        n_profiles=args.n,
        proportions=props,
        coefficients=scenario_coefficients(args.scenario),
        seed=s.seed,
    )
    lexicon, words = _resources(s)
    data = generate(cfg, lexicon, words)
    paths = write_synth(data, run.out)
    run.outputs.extend(p.name for p in paths.values())
    _emit("profiles", len(data.first))
    _emit("flag_rate", f"{np.mean([t.increased for t in data.truth]):.4f}")


def cmd_ingest(args, s: Settings, run: Run) -> None:
    path = _require(args.snapshot)
    run.input(path)
    crawl = dt.date.fromisoformat(args.crawl_date) if args.crawl_date else None
    snap = read_snapshot(path, crawl)
    if snap.crawl_date is None:
        raise CliError(f"{path}: no crawl_date header; pass --crawl-date")
    kept = filter_profiles(snap.profiles, CrawlContext(snap.crawl_date))
    name = args.name or f"{path.name.split('.')[0]}.filtered.jsonl"
    buf = io.StringIO()
    write_snapshot(buf, kept, snap.crawl_date)
    run.write(name, buf.getvalue())
    _emit("records", len(snap.profiles))
    _emit("malformed", snap.malformed)
    _emit("excluded", len(snap.profiles) - len(kept))
    _emit("kept", len(kept))


def _change_rows(summary) -> list[tuple[str, Any]]:
    return [
        ("Followers (first crawl)", summary.first),
        ("Followers (second crawl)", summary.second),
        ("Absolute Change", summary.absolute_change),
        ("Relative Change", summary.relative_change),
    ]


DESC_HEADER = ["variable", "mean", "sd", "median", "interval_2.5", "interval_97.5", "min", "max", "n"]


def _desc_csv_row(label: str, d) -> list[str]:
    return [label, _num(d.mean), _num(d.sd), _num(d.median), _num(d.interval_low), _num(d.interval_high),
            _num(d.minimum), _num(d.maximum), str(d.n)]


def _desc_text_row(label: str, d) -> list[str]:
    return [label, f"{d.mean:.3f}", f"{d.sd:.3f}", f"{d.median:.3f}",
            f"[{d.interval_low:.3f}, {d.interval_high:.3f}]", f"{d.minimum:.3f}", f"{d.maximum:.3f}", str(d.n)]


DESC_TEXT_HEADER = ["Variable", "Mean", "SD", "Median", "95 % interval", "Min", "Max", "N"]


def cmd_label(args, s: Settings, run: Run) -> None:
    p1, p2 = _require(args.first), _require(args.second)
    run.input(p1)
    run.input(p2)
    first = read_snapshot(p1)
    second = read_snapshot(p2)
    if first.crawl_date is None:
        raise CliError(f"{p1}: no crawl_date header")
    joined = join_snapshots(first.profiles, second.profiles)
    if not joined.labeled:
        raise CliError("the two snapshots share no user_id")
    buf = io.StringIO()
    write_snapshot(buf, joined.labeled, first.crawl_date)
    run.write("labeled.jsonl", buf.getvalue())
    summary = describe_changes(joined.labeled)
    rows = _change_rows(summary)
    run.write("changes.csv", _csv_text(DESC_HEADER, [_desc_csv_row(k, d) for k, d in rows]))
    text = _text_table(DESC_TEXT_HEADER, [_desc_text_row(k, d) for k, d in rows])
    text += f"\nIncreased follower count: {summary.increased} of {summary.n} ({summary.increased_percent:.1f} %)\n"
    run.write("changes.txt", text)
    _emit("malformed_first", first.malformed)
    _emit("malformed_second", second.malformed)
    _emit("labeled", len(joined.labeled))
    _emit("attrition", joined.attrition)
    _emit("new_in_second", joined.new_in_second)


def cmd_split(args, s: Settings, run: Run) -> None:
    records, ctx = _load_labeled(args.labeled)
    run.input(args.labeled)
    ratio = args.ratio if args.ratio is not None else s.split_ratio
    train, evaluation = stratified_split(records, ratio, s.seed)
    for name, part in (("train.jsonl", train), ("eval.jsonl", evaluation)):
        buf = io.StringIO()
        write_snapshot(buf, part, ctx.crawl_date)
        run.write(name, buf.getvalue())
    _emit("train", len(train))
    _emit("eval", len(evaluation))


def cmd_groups(args, s: Settings, run: Run) -> None:
    profiles, _, malformed = _load_profiles(args.input)
    run.input(args.input)
    lexicon, words = _resources(s)
    groups = [assign_group(p.name_field, lexicon, words) for p in profiles]
    run.write("groups.csv", _csv_text(["user_id", "group"], [[p.user_id, g.value] for p, g in zip(profiles, groups)]))
    n = len(profiles)
    counts = [[g.value, sum(x is g for x in groups)] for g in Group]
    run.write("group_counts.csv", _csv_text(
        ["group", "n", "percent"], [[g, c, f"{100.0 * c / n:.3f}" if n else ""] for g, c in counts]))
    if malformed:
        _emit("malformed", malformed)
    for g, c in counts:
        _emit(g, c)


def cmd_describe(args, s: Settings, run: Run) -> None:
    profiles, ctx, _ = _load_profiles(args.input)
    run.input(args.input)
    lexicon, words = _resources(s)
    parts = partition_by_group(profiles, lexicon, words)
    csv_rows, text_rows, hist_rows = [], [], []
    for g in Group:
        values = [p.followers_count for p in parts[g]]
        if not values:
            text_rows.append([g.title, "absent", "", "", "", "", "", "0"])
            continue
        d = describe(values)
        csv_rows.append(_desc_csv_row(g.value, d))
        text_rows.append(_desc_text_row(g.title, d))
        edges, counts = histogram(values, bins=args.bins, log_scale=True)
        hist_rows += [[g.value, _num(lo), _num(hi), int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    if not profiles:
        raise CliError(f"{args.input}: no profiles")
    d = describe([p.followers_count for p in profiles])
    csv_rows.append(_desc_csv_row("all", d))
    text_rows.append(_desc_text_row("All", d))
    run.write("describe.csv", _csv_text(DESC_HEADER, csv_rows))
    run.write("describe.txt", "Follower count by group\n\n" + _text_table(DESC_TEXT_HEADER, text_rows))
    run.write("histogram.csv", _csv_text(["group", "bin_low", "bin_high", "count"], hist_rows))
    if ctx is not None:
        X = np.vstack([extract_core(p, ctx).values for p in profiles])
        rows = [_desc_csv_row(name, describe(X[:, j])) for j, name in enumerate(CORE_FEATURES)]
        run.write("profile_features.csv", _csv_text(DESC_HEADER, rows))


def cmd_anova(args, s: Settings, run: Run) -> None:
    profiles, _, _ = _load_profiles(args.input)
    run.input(args.input)
    lexicon, words = _resources(s)
    parts = partition_by_group(profiles, lexicon, words)
    present = [g for g in Group if parts[g]]
    groups = [[float(p.followers_count) for p in parts[g]] for g in present]
    a = one_way_anova(groups)
    rows = [
        ["Between Groups", a.ss_between, a.df_between, a.ms_between, a.f_value, a.p_value],
        ["Within Groups", a.ss_within, a.df_within, a.ms_within, None, None],
        ["Total", a.ss_total, a.df_between + a.df_within, None, None, None],
    ]
    run.write("anova.csv", _csv_text(["source", "ss", "df", "ms", "f", "p_value"],
                                     [[r[0]] + [_num(v) for v in r[1:]] for r in rows]))
    text_rows = [[r[0], f"{r[1]:.6g}", str(r[2]), "" if r[3] is None else f"{r[3]:.6g}",
                  "" if r[4] is None else f"{r[4]:.3f}", "" if r[5] is None else format_p(r[5])] for r in rows]
    text = _text_table(["Source", "SS", "df", "MS", "F", "p"], text_rows)
    text += f"\nF({a.df_between}, {a.df_within}) = {a.f_value:.3f}, p = {format_p(a.p_value)}\n"
    comps = tukey_kramer(groups, a, labels=present)
    run.write("tukey.csv", _csv_text(
        ["group_a", "group_b", "mean_difference", "standard_error", "q", "p_value"],
        [[c.group_a.value, c.group_b.value, _num(c.mean_difference), _num(c.standard_error),
          _num(c.q_statistic), _num(c.p_value)] for c in comps]))
    text += "\nTukey-Kramer comparisons\n\n" + _text_table(
        ["Pair", "Mean diff", "SE", "q", "p"],
        [[f"{c.group_a.title} - {c.group_b.title}", f"{c.mean_difference:.3f}", f"{c.standard_error:.3f}",
          f"{c.q_statistic:.3f}", format_p(c.p_value)] for c in comps])
    run.write("anova.txt", text)


def _fit_group_logit(X: np.ndarray, y: np.ndarray, names: tuple[str, ...]):
    """Fit after dropping constant and collinear columns; returns (model, dropped)."""
    keep = [j for j in range(X.shape[1]) if np.ptp(X[:, j]) > 0]
    dropped = [names[j] for j in range(X.shape[1]) if j not in keep]
    for _ in range(X.shape[1]):
        try:
            model = fit_logit(X[:, keep], y, [names[j] for j in keep])
            return model, dropped
        except LogitError as exc:
            msg = str(exc)
            if "collinear columns" not in msg:
                raise
            bad = [j for j in keep if f"'{names[j]}'" in msg.split("collinear columns:", 1)[1]]
            if not bad:
                raise
            keep = [j for j in keep if j not in bad]
            dropped += [names[j] for j in bad]
    raise LogitError("no usable feature columns")


def cmd_logreg(args, s: Settings, run: Run) -> None:
    records, ctx = _load_labeled(args.labeled)
    run.input(args.labeled)
    lexicon, words = _resources(s)
    parts = partition_by_group(records, lexicon, words)
    wald_rows, summary_rows, text = [], [], []
    for g in Group:
        rows = parts[g]
        if not rows:
            text.append(f"{g.title}: absent\n")
            continue
        X, y = feature_matrix([extract(r, g, ctx, lexicon, words) for r in rows])
        try:
            model, dropped = _fit_group_logit(X, y, schema_for(g).feature_names)
        except LogitError as exc:
            raise CliError(f"logistic regression for group {g.value}: {exc}") from None
        r2 = nagelkerke_r2(model)
        summary_rows.append([g.value, model.n, _num(model.log_likelihood), _num(model.null_log_likelihood),
                             _num(-2 * model.log_likelihood), _num(r2), model.iterations, int(model.converged),
                             ";".join(dropped), "; ".join(model.diagnostics)])
        head = f"{g.title} (n = {model.n}, -2LL = {-2 * model.log_likelihood:.3f}, Nagelkerke R2 = {r2:.3f})\n"
        if dropped:
            head += f"dropped (constant or collinear): {', '.join(dropped)}\n"
        if not model.converged:
            _emit(f"{g.value}.converged", "false")
            text.append(head + f"no Wald table: {'; '.join(model.diagnostics)}\n")
            continue
        table = wald_table(model, include_intercept=True)
        for w in table:
            wald_rows.append([g.value, w.variable, _num(w.beta), w.stars, _num(w.standard_error),
                              _num(w.wald_statistic), _num(w.p_value), _num(w.odds_ratio)])
        body = _text_table(
            ["Variable", "B", "", "SE", "Wald", "p", "Exp(B)"],
            [[w.variable, f"{w.beta:.3f}", w.stars, f"{w.standard_error:.3f}", f"{w.wald_statistic:.3f}",
              format_p(w.p_value), f"{w.odds_ratio:.3f}"] for w in table])
        text.append(head + "\n" + body)
    text.append("Significance: * p < 0.05, ** p < 0.01, *** p < 0.001\n")
    run.write("logreg.csv", _csv_text(
        ["group", "variable", "beta", "stars", "standard_error", "wald", "p_value", "odds_ratio"], wald_rows))
    run.write("logreg_summary.csv", _csv_text(
        ["group", "n", "log_likelihood", "null_log_likelihood", "minus_2ll", "nagelkerke_r2", "iterations",
         "converged", "dropped", "diagnostics"], summary_rows))
    run.write("logreg.txt", "\n".join(text))


def _grids(s: Settings) -> dict:
    if not s.grids:
        raise CliError("configuration defines no [grid.<family>] section")
    return s.grids


def _search_text(searches) -> str:
    rows = []
    for g, search in searches.items():
        for fname, res in search.best.items():
            mark = "*" if fname == search.best_family else ""
            rows.append([g.title, fname + mark, json.dumps(res.parameters, sort_keys=True),
                         f"{res.mean_auc:.3f}", f"{res.sd_auc:.3f}"])
        failed = [r for rs in search.results.values() for r in rs if not r.ok]
        for r in failed:
            rows.append([g.title, r.family, json.dumps(r.parameters, sort_keys=True), "failed", r.error or ""])
    return "Best configuration per family (* = selected)\n\n" + _text_table(
        ["Group", "Family", "Parameters", "CV AUC", "SD"], rows)


def _cv_csv(searches) -> str:
    buf = io.StringIO()
    for i, (g, search) in enumerate(searches.items()):
        part = io.StringIO()
        write_cv_report(part, search, group=g.value)
        lines = part.getvalue().splitlines(keepends=True)
        buf.writelines(lines if i == 0 else lines[1:])
    return buf.getvalue()


def cmd_gridsearch(args, s: Settings, run: Run) -> None:
    records, ctx = _load_labeled(args.train)
    run.input(args.train)
    lexicon, words = _resources(s)
    parts = partition_by_group(records, lexicon, words)
    searches = {}
    for g in Group:
        if not parts[g]:
            raise CliError(f"group {g.value} has no training rows")
        X, y = feature_matrix([extract(r, g, ctx, lexicon, words) for r in parts[g]])
        searches[g] = grid_search(_grids(s), fit_scaler(X).apply(X), y, k=s.k, repeats=s.repeats,
                                  seed=s.seed, threads=s.threads)
    run.write("cv_report.csv", _cv_csv(searches))
    run.write("gridsearch.txt", _search_text(searches))


def cmd_train(args, s: Settings, run: Run) -> None:
    records, ctx = _load_labeled(args.train)
    run.input(args.train)
    lexicon, words = _resources(s)
    try:
        router, searches = train_router(records, lexicon, words, ctx, _grids(s),
                                        CvConfig(s.k, s.repeats, s.threads), seed=s.seed)
    except RouterError as exc:
        raise CliError(str(exc)) from None
    save_router(router, run.path("router.model"))
    run.write("cv_report.csv", _cv_csv(searches))
    run.write("train.txt", _search_text(searches))
    for g, e in router.entries.items():
        _emit(f"{g.value}.model", e.family)


EVAL_HEADER = ["group", "n", "model", "parameters", "cv_auc", "heldout_auc", "global_auc", "random_auc"]


def cmd_evaluate(args, s: Settings, run: Run) -> None:
    model_path = _require(args.model)
    run.input(model_path)
    records, ctx = _load_labeled(args.eval)
    run.input(args.eval)
    lexicon, words = _resources(s)
    router = load_router(model_path)
    routed = evaluate_router(router, records, ctx, lexicon, words)
    rand = evaluate_random_baseline(records, lexicon, words, seed=s.seed)
    glob = None
    if args.train:
        train, tctx = _load_labeled(args.train)
        run.input(args.train)
        overlap = {r.profile.user_id for r in train} & {r.profile.user_id for r in records}
        if overlap:
            raise CliError(f"evaluation data overlaps the training data ({len(overlap)} users)")
        baseline = train_global_baseline(train, tctx, _grids(s), CvConfig(s.k, s.repeats, s.threads), seed=s.seed)
        glob = evaluate_global_baseline(baseline, records, ctx, lexicon, words)
    rows, text_rows = [], []
    for g in Group:
        e = router.entries[g]
        vals = [e.cv_mean_auc, routed.group_auc[g], glob.group_auc[g] if glob else None, rand.group_auc[g]]
        rows.append([g.value, routed.group_n[g], e.family, json.dumps(e.parameters, sort_keys=True)]
                    + [_num(v) for v in vals])
        text_rows.append([g.title, str(routed.group_n[g]), e.family] + [_fmt(v) for v in vals])
    n_all = sum(routed.group_n.values())
    overall = [None, routed.overall_auc, glob.overall_auc if glob else None, rand.overall_auc]
    rows.append(["overall", n_all, "router", ""] + [_num(v) for v in overall])
    text_rows.append(["Overall", str(n_all), "router", "-"] + [_fmt(v) for v in overall[1:]])
    run.write("evaluation.csv", _csv_text(EVAL_HEADER, rows))
    text = "AUC per group (CV = mean over training folds; held-out = evaluation partition)\n\n"
    text += _text_table(["Group", "N", "Model", "CV AUC", "Held-out AUC", "Global AUC", "Random AUC"], text_rows)
    if glob is None:
        text += "\nGlobal baseline not computed (pass --train to fit it).\n"
    run.write("evaluation.txt", text)


def cmd_predict(args, s: Settings, run: Run) -> None:
    model_path = _require(args.model)
    run.input(model_path)
    crawl = dt.date.fromisoformat(args.crawl_date) if args.crawl_date else None
    profiles, ctx, malformed = _load_profiles(args.input, crawl)
    run.input(args.input)
    if ctx is None:
        raise CliError(f"{args.input}: no crawl_date header; pass --crawl-date")
    lexicon, words = _resources(s)
    router = load_router(model_path)
    results = classify_many(router, profiles, ctx, lexicon, words)
    run.write("predictions.csv", _csv_text(
        ["user_id", "group", "probability", "label"],
        [[c.user_id, c.group.value, _num(c.probability), int(c.label)] for c in results]))
    if malformed:
        _emit("malformed", malformed)
    _emit("predicted", len(results))


COMMANDS: dict[str, Callable] = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "label": cmd_label,
    "split": cmd_split,
    "groups": cmd_groups,
    "describe": cmd_describe,
    "anova": cmd_anova,
    "logreg": cmd_logreg,
    "gridsearch": cmd_gridsearch,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
}

# Argument destinations holding input paths; stored absolute in manifests.
PATH_ARGS = {"snapshot", "first", "second", "labeled", "input", "train", "eval", "model"}


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (INI); defaults to the bundled full-size grid")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--threads", type=int, help="worker threads (default: available cores); results do not depend on it")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--lexicon", help="given-name lexicon CSV (default: bundled)")
    common.add_argument("--wordlist", help="English wordlist (default: bundled)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="followcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"followcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    p = add("synth", "generate two synthetic crawls with planted truth")
    p.add_argument("--n", type=int, default=10_000, help="number of profiles")
    p.add_argument("--scenario", choices=SCENARIOS, default="default", help="planted coefficient set")
    p.add_argument("--proportions", choices=("population", "equal"), default="population", help="group mixture")

    p = add("ingest", "parse a snapshot and drop protected, verified and inactive accounts")
    p.add_argument("snapshot")
    p.add_argument("--crawl-date", help="YYYY-MM-DD, overrides the file header")
    p.add_argument("--name", help="output file name (default: <stem>.filtered.jsonl)")

    p = add("label", "join two snapshots into labeled records")
    p.add_argument("first")
    p.add_argument("second")

    p = add("split", "stratified train/eval split")
    p.add_argument("labeled")
    p.add_argument("--ratio", type=float, help="training share (overrides the config)")

    p = add("groups", "assign every profile to its name-field group")
    p.add_argument("input", help="snapshot or labeled file")

    p = add("describe", "follower-count statistics per group and histogram bins")
    p.add_argument("input", help="snapshot or labeled file")
    p.add_argument("--bins", type=int, default=50)

    p = add("anova", "one-way ANOVA of follower counts across groups with Tukey-Kramer post-hoc tests")
    p.add_argument("input", help="snapshot or labeled file")

    p = add("logreg", "per-group logistic regression with Wald tests")
    p.add_argument("labeled")

    p = add("gridsearch", "cross-validated grid search per group")
    p.add_argument("train")

    p = add("train", "train the group router")
    p.add_argument("train")

    p = add("evaluate", "held-out AUC of a router with global and random baselines")
    p.add_argument("model")
    p.add_argument("eval")
    p.add_argument("--train", dest="train", help="training file for the global baseline")

    p = add("predict", "score profiles with a trained router")
    p.add_argument("model")
    p.add_argument("input", help="snapshot or labeled file")
    p.add_argument("--crawl-date", help="YYYY-MM-DD, overrides the file header")

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the manifest's directory)")
    p.add_argument("--threads", type=int)
    p.add_argument("--check", action="store_true", help="fail unless outputs match the recorded hashes")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _arguments(args: argparse.Namespace) -> dict:
    skip = {"command", "config", "seed", "threads", "out", "verbose", "lexicon", "wordlist"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = str(Path(v).resolve()) if k in PATH_ARGS and v is not None else v
    return out


def execute(command: str, arguments: dict, settings: Settings, out: Path, config_text: str) -> Run:
    run = Run(command, out, settings, arguments, config_text)
    for key in ("lexicon", "wordlist"):
        run.input(getattr(settings, key))
    COMMANDS[command](argparse.Namespace(**arguments), settings, run)
    run.finish()
    return run


def rerun(args: argparse.Namespace) -> int:
    path = _require(args.manifest)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        if manifest.get("manifest_version") != MANIFEST_VERSION:
            raise CliError(f"{path}: unsupported manifest version {manifest.get('manifest_version')!r}")
        command = manifest["command"]
        settings = Settings(**manifest["settings"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: unreadable manifest ({exc})") from None
    if command not in COMMANDS:
        raise CliError(f"{path}: unknown command {command!r}")
    settings.threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    settings.validate()
    for item in manifest["inputs"]:
        p = Path(item["path"])
        if not p.is_file():
            raise CliError(f"input recorded in manifest is missing: {p}")
        if _sha256(p) != item["sha256"]:
            raise CliError(f"input changed since the recorded run: {p}")
    out = Path(args.out) if args.out else path.parent
    run = execute(command, manifest["arguments"], settings, out, manifest["config"])
    if args.check:
        recorded = {o["name"]: o["sha256"] for o in manifest["outputs"]}
        current = {o["name"]: o["sha256"] for o in run.manifest()["outputs"]}
        if recorded != current:
            changed = sorted(n for n in set(recorded) | set(current) if recorded.get(n) != current.get(n))
            raise CliError(f"outputs differ from the manifest: {', '.join(changed)}")
        _emit("outputs_match", "true")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "rerun":
            return rerun(args)
        settings, config_text = resolve_settings(args)
        execute(args.command, _arguments(args), settings, Path(args.out), config_text)
        return 0
    except CliError as exc:
        msg = str(exc)
    except (SnapshotError, LexiconError, RouterError, LogitError, ValueError, OSError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
    print(f"followcast: error: {msg}".splitlines()[0], file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
