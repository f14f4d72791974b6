"""Command-line entry point: ``timecf {synth,explain,benchmark,extract-shapelets,train-gan}``.

Every command reads an optional JSON config; flags given on the command line
override it. The fully resolved config is echoed into each output artifact.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .cfgen import METHODS, ExplainConfig, TimeCF
from .classifiers import make_classifier
from .core import Dataset, InputError, Interval, TimeCFError, UsageError
from .eval.benchmark import BENCHMARK_TIMEGAN, run_benchmark
from .ingest import SyntheticSpec, make_synthetic_bump, parse_ucr_file, stratified_split, write_ucr_file
from .plotting import metric_figures, write_explanation_svg
from .shapelets import RstConfig, extract_top_shapelets
from .timegan import TimeGanConfig, train_timegan

log = logging.getLogger("timecf")

EXIT_OK, EXIT_ERROR, EXIT_NO_COUNTERFACTUAL = 0, 1, 2
CLASSIFIERS = ("1nn", "cnn", "constant")


def _build(cls, d: dict, what: str):
    unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise InputError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass
class RunConfig:
    """Everything a command needs; nested configs are plain dicts until resolved."""

    dataset: dict = field(default_factory=lambda: {"synthetic": {}})
    classifier: str = "1nn"
    classifier_hyper: dict = field(default_factory=dict)
    classifiers: list = field(default_factory=lambda: ["1nn", "cnn"])
    method: str = "timecf"
    methods: list = field(default_factory=lambda: list(METHODS))
    rst: dict = field(default_factory=dict)
    timegan: dict = field(default_factory=dict)
    m_fakes: int = 50
    eps: float = 1e-8
    seed: int = 0
    out: str = "out"
    threads: int = 1
    instance: int = 0
    label: int = 0

    def __post_init__(self):
        sources = [k for k in ("synthetic", "ucr") if k in self.dataset]
        if len(sources) != 1 or len(self.dataset) != 1:
            raise InputError("dataset must name exactly one source: 'synthetic' or 'ucr'")
        for kind in [self.classifier, *self.classifiers]:
            if kind not in CLASSIFIERS:
                raise InputError(f"unknown classifier {kind!r}")
        for m in [self.method, *self.methods]:
            if m not in METHODS:
                raise InputError(f"unknown method {m!r}")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        # resolve eagerly so a bad nested config fails before any work starts
        self.synthetic_spec()
        self.explain_config()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _build(cls, d, "config")

    def synthetic_spec(self) -> SyntheticSpec | None:
        if "synthetic" not in self.dataset:
            return None
        d = {"seed": self.seed, **self.dataset["synthetic"]}
        if "bump_interval" in d:
            d["bump_interval"] = Interval(*d["bump_interval"])
        return _build(SyntheticSpec, d, "synthetic dataset")

    def rst_config(self) -> RstConfig:
        d = {"seed": self.seed, "n_jobs": self.threads, **self.rst}
        if "lengths" in d:
            d["lengths"] = tuple(d["lengths"])
        return _build(RstConfig, d, "rst")

    def timegan_config(self) -> TimeGanConfig:
        return _build(TimeGanConfig, {**BENCHMARK_TIMEGAN.to_dict(), "seed": self.seed, **self.timegan}, "timegan")

    def explain_config(self) -> ExplainConfig:
        return ExplainConfig(m_fakes=self.m_fakes, eps=self.eps, seed=self.seed,
                             rst=self.rst_config(), timegan=self.timegan_config())

    def echo(self) -> dict:
        """Resolved config: nested sections show every effective field."""
        d = dataclasses.asdict(self)
        spec = self.synthetic_spec()
        if spec is not None:
            sd = dataclasses.asdict(spec)
            sd["bump_interval"] = [spec.bump_interval.start, spec.bump_interval.length]
            d["dataset"] = {"synthetic": sd}
        d["rst"] = dataclasses.asdict(self.rst_config())
        d["rst"]["lengths"] = list(d["rst"]["lengths"])
        d["timegan"] = self.timegan_config().to_dict()
        return d


def load_dataset(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    spec = cfg.synthetic_spec()
    if spec is not None:
        return stratified_split(make_synthetic_bump(spec), 0.25, seed=spec.seed)
    ucr = cfg.dataset["ucr"]
    if "train" not in ucr or "test" not in ucr:
        raise InputError("ucr dataset needs 'train' and 'test' paths")
    train, test = parse_ucr_file(ucr["train"]), parse_ucr_file(ucr["test"])
    if train.raw_labels != test.raw_labels:
        raise InputError("train and test files carry different label sets")
    return train, test


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def cmd_synth(cfg: RunConfig, out: Path) -> int:
    if "synthetic" not in cfg.dataset:
        raise UsageError("synth needs a synthetic dataset config")
    train, test = load_dataset(cfg)
    write_ucr_file(train, out / "synthetic_TRAIN.tsv")
    write_ucr_file(test, out / "synthetic_TEST.tsv")
    _write_json(out / "synth_config.json", {"config": cfg.echo()})
    print(f"wrote {len(train)} train and {len(test)} test rows to {out}")
    return EXIT_OK


def cmd_explain(cfg: RunConfig, out: Path) -> int:
    train, test = load_dataset(cfg)
    if not 0 <= cfg.instance < len(test):
        raise InputError(f"instance {cfg.instance} out of range [0, {len(test)})")
    f = make_classifier(cfg.classifier, train, seed=cfg.seed, **cfg.classifier_hyper)
    t = test.series(cfg.instance)
    l = int(f.predict(t))
    explainer = TimeCF(train, f, cfg.explain_config())
    report = explainer.explain(t, l) if cfg.method == "timecf" else explainer.explain_nun(t, l)
    payload = report.to_dict(include_runtime=True)
    payload["config"] = cfg.echo()
    payload["instance"] = cfg.instance
    payload["true_label"] = int(test.y[cfg.instance])
    _write_json(out / "report.json", payload)
    write_explanation_svg(out / "plot.svg", report)
    if not report.explained:
        print(f"no counterfactual found for instance {cfg.instance}")
        return EXIT_NO_COUNTERFACTUAL
    rec = report.recommended
    print(f"instance {cfg.instance}: label {l} -> {rec.predicted_label}, interval "
          f"[{rec.interval.start}, {rec.interval.stop}), {rec.hamming} points changed, L1 {rec.l1:.4f}")
    return EXIT_OK


def cmd_benchmark(cfg: RunConfig, out: Path) -> int:
    train, test = load_dataset(cfg)
    name = "synthetic-bump" if "synthetic" in cfg.dataset else Path(cfg.dataset["ucr"]["train"]).stem
    models = {k: make_classifier(k, train, seed=cfg.seed, **cfg.classifier_hyper) for k in cfg.classifiers}
    start = time.perf_counter()
    echo = cfg.echo()
    report = run_benchmark(name, train, test, models, cfg.methods, cfg.explain_config(), echo=echo)
    elapsed = time.perf_counter() - start
    (out / "metrics.json").write_text(report.to_json() + "\n", encoding="utf-8")
    report.write_csvs(out)
    table = report.to_table()
    (out / "table.txt").write_text(table, encoding="utf-8")
    metric_figures(report, out, description=json.dumps(echo, sort_keys=True))
    _write_json(out / "config.json", {"config": echo, "runtime_s": elapsed})
    sys.stdout.write(table)
    failed = [c for c in report.cells if c.error]
    for c in failed:
        print(f"cell {c.classifier}/{c.method} failed: {c.error}", file=sys.stderr)
    return EXIT_ERROR if failed else EXIT_OK


def cmd_extract_shapelets(cfg: RunConfig, out: Path) -> int:
    train, _ = load_dataset(cfg)
    shapelets = extract_top_shapelets(train, cfg.rst_config())
    _write_json(out / "shapelets.json", {"config": cfg.echo(), "shapelets": [s.to_dict() for s in shapelets]})
    for s in shapelets:
        print(f"{s.key}\tclass={s.class_label}\tig={s.quality:.4f}")
    return EXIT_OK


def cmd_train_gan(cfg: RunConfig, out: Path) -> int:
    train, _ = load_dataset(cfg)
    explainer = TimeCF(train, make_classifier("constant", train), cfg.explain_config())
    model, fakes = explainer.gan_for(cfg.label)
    model.save(out / "gan.tcf")
    _write_json(out / "gan.json", {
        "config": cfg.echo(),
        "excluded_label": cfg.label,
        "final_losses": {k: (v[-1] if v else None) for k, v in model.history.items()},
        "fakes": [[float(x) for x in row] for row in fakes],
    })
    print(f"trained GAN without label {cfg.label}; wrote {out / 'gan.tcf'}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "explain": cmd_explain,
    "benchmark": cmd_benchmark,
    "extract-shapelets": cmd_extract_shapelets,
    "train-gan": cmd_train_gan,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags, which would read as "no counterfactual"
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="timecf", description="Counterfactual explanations for time series classifiers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=str)
        p.add_argument("--threads", type=int)
        p.add_argument("--instance", type=int)
        p.add_argument("--classifier", choices=CLASSIFIERS)
        p.add_argument("--method", choices=METHODS)
        if name == "train-gan":
            p.add_argument("--label", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise InputError("config must be a JSON object")
    for key in ("seed", "out", "threads", "instance", "classifier", "method", "label"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if args.seed is not None:
        # an explicit seed flag reseeds every component
        for section in ("rst", "timegan"):
            raw.get(section, {}).pop("seed", None)
        raw.get("dataset", {}).get("synthetic", {}).pop("seed", None)
    return RunConfig.from_dict(raw)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (TimeCFError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
