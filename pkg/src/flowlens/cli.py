"""Command-line pipeline: synth, extract, label, train, eval, explain, report.

Every artifact embeds the effective configuration hash and seed, and every
stage is deterministic for a fixed configuration, so reruns are byte-identical.

Exit codes: 0 ok, 2 input error, 3 consistency error (column fingerprint
mismatches), 1 internal error. Seed precedence: --seed flag, then the config
file, then the FLOWLENS_SEED environment variable, then the default.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import explain as explain_mod
from . import report as report_mod
from .evaluation import EvaluationReport, ModelSpec, crossval_evaluate, evaluate_split
from .explain import FingerprintMismatch
from .features import compute_features
from .flows import (DEFAULT_ACTIVE_TIMEOUT, DEFAULT_ACTIVITY_TIMEOUT,
                    DEFAULT_IDLE_TIMEOUT, assemble_flows)
from .forest import Forest, ForestParams, train_forest
from .mlp import MlpParams, train_mlp
from .model_io import ModelFormatError, load_model, save_model
from .pcap import ParseStats, PcapFormatError, parse_pcap, write_pcap
from .schema import SchemaError, load_schema
from .synth import ScenarioParams, generate_scenario
from .util import config_hash

DEFAULT_SEED = 7
SEED_ENV_VAR = "FLOWLENS_SEED"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_CONSISTENCY = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _load_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file not found: {path}")
    config = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise CliError(f"{path}:{lineno}: expected key=value")
        k, v = body.split("=", 1)
        config[k.strip()] = v.strip()
    return config


class Settings:
    """CLI values with config-file fallback and provenance hashing."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _load_config_file(getattr(args, "config", None))
        self.effective: dict[str, object] = {"command": args.command}

    def get(self, key: str, default, cast=None):
        value = getattr(self.args, key, None)
        if value is None and key in self.config:
            value = self.config[key]
        if value is None:
            value = default
        if cast is not None and value is not None:
            value = cast(value)
        self.effective[key] = value
        return value

    def seed(self) -> int:
        value = getattr(self.args, "seed", None)
        if value is None and "seed" in self.config:
            value = int(self.config["seed"])
        if value is None and os.environ.get(SEED_ENV_VAR):
            value = int(os.environ[SEED_ENV_VAR])
        if value is None:
            value = DEFAULT_SEED
        self.effective["seed"] = int(value)
        return int(value)

    def provenance(self) -> dict:
        return {"config_hash": config_hash(self.effective),
                "seed": self.effective.get("seed", DEFAULT_SEED)}


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {path}")
    return p


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    st = Settings(args)
    seed = st.seed()
    params = ScenarioParams(
        benign_http=st.get("benign_http", ScenarioParams.benign_http, int),
        benign_dns=st.get("benign_dns", ScenarioParams.benign_dns, int),
        flood_flows=st.get("flood_flows", ScenarioParams.flood_flows, int),
        dos_flows=st.get("dos_flows", ScenarioParams.dos_flows, int),
        seed=seed,
    )
    out = _out_dir(args.out_dir)
    packets, events = generate_scenario(params)
    with open(out / "synth.pcap", "wb") as fh:
        write_pcap(fh, packets)
    ds_mod.write_events_csv(out / "ground_truth.csv", events, meta=st.provenance())
    print(f"wrote {len(packets)} packets and {len(events)} events to {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    st = Settings(args)
    st.seed()
    idle = st.get("idle_timeout", DEFAULT_IDLE_TIMEOUT, float)
    active = st.get("active_timeout", DEFAULT_ACTIVE_TIMEOUT, float)
    activity = st.get("activity_timeout", DEFAULT_ACTIVITY_TIMEOUT, float)
    threads = st.get("threads", 1, int)
    st.effective["schema"] = args.schema
    schema = load_schema(args.schema)

    pcap_path = _require_file(args.pcap, "pcap file")
    with open(pcap_path, "rb") as fh:
        stats = ParseStats()
        packets = parse_pcap(fh, stats)
    flows = assemble_flows(packets, idle_timeout=idle, active_timeout=active)

    def build(flow):
        return compute_features(flow, schema, activity_timeout=activity)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(build, flows))
    else:
        rows = [build(flow) for flow in flows]
    table = ds_mod.FeatureTable(schema, rows)
    meta = st.provenance()
    meta["schema"] = schema.name
    meta["schema_version"] = schema.version
    ds_mod.write_feature_csv(args.out, table, meta=meta)
    print(f"decoded {stats.packets} packets ({stats.skipped} skipped), "
          f"{len(flows)} flows -> {args.out}")
    return EXIT_OK


def cmd_label(args) -> int:
    st = Settings(args)
    st.seed()
    table, _ = ds_mod.read_feature_csv(_require_file(args.features, "feature CSV"))
    events = ds_mod.read_events_csv(_require_file(args.events, "ground truth CSV"))
    stats = ds_mod.LabelStats()
    labeled = ds_mod.label_table(table, events, stats)
    ds_mod.write_labeled_csv(args.out, labeled, meta=st.provenance())
    print(f"labeled {len(labeled.labels)} flows ({stats.attacks} attacks, "
          f"{stats.conflicts} conflicting matches) -> {args.out}")
    return EXIT_OK


def _model_spec(st: Settings, seed: int) -> ModelSpec:
    kind = st.args.model
    st.effective["model"] = kind
    forest = ForestParams(
        n_trees=st.get("trees", 100, int),
        max_depth=st.get("max_depth", 16, int),
        min_samples_split=st.get("min_samples_split", 2, int),
        feature_subsample=st.get("feature_fraction", "sqrt",
                                 lambda v: v if v == "sqrt" else float(v)),
        seed=seed,
    )
    hidden = st.get("hidden", "64,32,16", str)
    mlp = MlpParams(
        hidden=tuple(int(h) for h in str(hidden).split(",") if h),
        learning_rate=st.get("learning_rate", 0.05, float),
        epochs=st.get("epochs", 60, int),
        batch_size=st.get("batch_size", 32, int),
        seed=seed,
    )
    return ModelSpec(kind=kind, forest_params=forest, mlp_params=mlp)


def cmd_train(args) -> int:
    st = Settings(args)
    seed = st.seed()
    threads = st.get("threads", 1, int)
    labeled, _ = ds_mod.read_labeled_csv(_require_file(args.data, "labeled CSV"))
    learnable = ds_mod.drop_identifiers(labeled)
    spec = _model_spec(st, seed)

    X_raw = learnable.X()
    scaler = ds_mod.MinMaxScaler.fit(X_raw)
    fingerprint = learnable.schema.fingerprint()
    model = spec.train(scaler.transform(X_raw), learnable.y(), threads=threads,
                       fingerprint=fingerprint)
    save_model(args.out, model, scaler=scaler,
               feature_names=learnable.schema.learnable_names, meta=st.provenance())
    print(f"trained {spec.kind} on {len(X_raw)} rows -> {args.out}")
    return EXIT_OK


def _write_report_files(out_dir: Path, stem: str, report, provenance: dict):
    base = out_dir / stem
    report_mod.write_report_csv(f"{base}_report.csv", report, meta=provenance)
    report_mod.write_report_jsonl(f"{base}_report.jsonl", report, meta=provenance)
    label = f"{report.dataset_name} [{report.feature_set}] {report.model_name}"
    table = report_mod.render_metrics_table([(label, report.means())])
    Path(f"{base}_report.txt").write_text(table, encoding="utf-8")


def cmd_eval(args) -> int:
    st = Settings(args)
    seed = st.seed()
    threads = st.get("threads", 1, int)
    timing_rows = st.get("timing_rows", 256, int)
    timing_repeats = st.get("timing_repeats", 3, int)
    labeled, _ = ds_mod.read_labeled_csv(_require_file(args.data, "labeled CSV"))
    learnable = ds_mod.drop_identifiers(labeled)
    dataset_name = Path(args.data).stem
    out = _out_dir(args.out_dir)

    if args.model_file:
        st.effective["model_file"] = args.model_file
        saved = load_model(_require_file(args.model_file, "model file"))
        if saved.model.schema_fingerprint != learnable.schema.fingerprint():
            raise FingerprintMismatch(
                "model and dataset were built from different feature columns")
        if saved.scaler is None:
            raise CliError("model file carries no scaler; cannot normalize inputs")
        fold = evaluate_split(saved.model, saved.scaler, learnable.X(), learnable.y(),
                              timing_rows=timing_rows, timing_repeats=timing_repeats)
        report = EvaluationReport(dataset_name=dataset_name, model_name=saved.kind,
                                  seed=seed, k=1, folds=[fold],
                                  feature_set=learnable.schema.name)
        stem = f"{dataset_name}_{saved.kind}_saved"
    else:
        if not args.model:
            raise CliError("eval needs --model or --model-file")
        k = st.get("folds", 5, int)
        spec = _model_spec(st, seed)
        report = crossval_evaluate(
            learnable, spec, k=k, seed=seed, dataset_name=dataset_name,
            threads=threads, timing_rows=timing_rows, timing_repeats=timing_repeats,
            feature_set=learnable.schema.name,
        )
        stem = f"{dataset_name}_{spec.kind}"
    _write_report_files(out, stem, report, st.provenance())
    means = report.means()
    print(f"{stem}: mean f1={means['f1']:.4f} dr={means['dr']:.4f} "
          f"far={means['far']:.4f} auc={means['auc']:.4f} "
          f"time={means['prediction_time_micros']:.2f}us")
    return EXIT_OK


def cmd_explain(args) -> int:
    st = Settings(args)
    seed = st.seed()
    samples = st.get("samples", 500, int)
    background_size = st.get("background", 100, int)
    budget = st.get("budget", 2048, lambda v: v if v == "full" else int(v))
    labeled, _ = ds_mod.read_labeled_csv(_require_file(args.data, "labeled CSV"))
    learnable = ds_mod.drop_identifiers(labeled)
    saved = load_model(_require_file(args.model_file, "model file"))
    st.effective["model_file"] = args.model_file

    fingerprint = learnable.schema.fingerprint()
    if saved.model.schema_fingerprint != fingerprint:
        raise FingerprintMismatch(
            "model and dataset were built from different feature columns")
    if saved.scaler is None:
        raise CliError("model file carries no scaler; cannot normalize inputs")

    method = args.method
    if method is None:
        method = "tree" if isinstance(saved.model, Forest) else "kernel"
    st.effective["method"] = method

    X = saved.scaler.transform(learnable.X())
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    bg_idx = rng.choice(len(X), size=min(background_size, len(X)), replace=False)
    ex_idx = rng.choice(len(X), size=min(samples, len(X)), replace=False)
    background = X[np.sort(bg_idx)]
    explain_rows = X[np.sort(ex_idx)]

    explanations = explain_mod.explain_samples(
        saved.model, explain_rows, background, method=method,
        coalition_budget=budget, seed=seed, fingerprint=fingerprint,
    )
    ranking = explain_mod.global_ranking(explanations, learnable.schema.learnable_names)

    out = _out_dir(args.out_dir)
    stem = f"{Path(args.data).stem}_{saved.kind}_{method}"
    provenance = st.provenance()
    report_mod.write_explanations_jsonl(out / f"{stem}_explanations.jsonl",
                                        explanations, seed=seed, meta=provenance)
    report_mod.write_ranking_csv(out / f"{stem}_ranking.csv", ranking, meta=provenance)
    top = ranking.top(5)
    names = ", ".join(name for _, name, _, _ in top)
    print(f"explained {len(explanations)} samples ({method}); top features: {names}")
    return EXIT_OK


def cmd_report(args) -> int:
    st = Settings(args)
    st.seed()
    top_k = st.get("top_k", 20, int)
    reports = [report_mod.read_report_csv(_require_file(p, "report CSV"))
               for p in (args.reports or [])]
    rankings = [(Path(p).stem, report_mod.read_ranking_csv(_require_file(p, "ranking CSV")))
                for p in (args.rankings or [])]
    if not reports and not rankings:
        raise CliError("report needs at least one --reports or --rankings input")
    out = _out_dir(args.out_dir)
    provenance = st.provenance()
    meta_comment = f"config_hash={provenance['config_hash']} seed={provenance['seed']}"

    written = []
    if reports:
        rows = [(f"{r.dataset_name} [{r.feature_set}] {r.model_name}", r.means())
                for r in reports]
        table = report_mod.render_metrics_table(rows, title="Mean cross-validated metrics")
        (out / "metrics_table.txt").write_text(table, encoding="utf-8")
        written.append("metrics_table.txt")
        for model in sorted({r.model_name for r in reports}):
            subset = [r for r in reports if r.model_name == model]
            svg = report_mod.f1_chart(subset, title=f"F1 score by dataset ({model})",
                                      meta=meta_comment)
            name = f"f1_{model}.svg"
            (out / name).write_text(svg, encoding="utf-8")
            written.append(name)
    for stem, (features, _, normalized) in rankings:
        svg = report_mod.ranking_chart(features, normalized,
                                       title=f"Top {top_k} features: {stem}",
                                       k=top_k, meta=meta_comment)
        name = f"{stem}_top{top_k}.svg"
        (out / name).write_text(svg, encoding="utf-8")
        written.append(name)
    print(f"wrote {', '.join(written)} to {out}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowlens",
        description="Flow feature extraction, traffic classifiers, and "
                    "Shapley-value explanations for packet captures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file; flags override it")
        p.add_argument("--seed", type=int, help="master seed (default 7, or FLOWLENS_SEED)")

    p = sub.add_parser("synth", help="generate the synthetic test pcap and ground truth")
    common(p)
    p.add_argument("--out-dir", required=True, help="directory for synth.pcap and ground_truth.csv")
    p.add_argument("--benign-http", type=int, help="number of benign request/response flows")
    p.add_argument("--benign-dns", type=int, help="number of benign two-packet exchanges")
    p.add_argument("--flood-flows", type=int, help="number of half-open flood flows")
    p.add_argument("--dos-flows", type=int, help="number of high-rate repetitive flows")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="pcap -> per-flow feature CSV")
    common(p)
    p.add_argument("--pcap", required=True, help="input capture file")
    p.add_argument("--schema", required=True, choices=["netflow_v2", "cic"],
                   help="feature schema to compute")
    p.add_argument("--out", required=True, help="output feature CSV path")
    p.add_argument("--idle-timeout", type=float, help="flow idle timeout, seconds (default 15)")
    p.add_argument("--active-timeout", type=float, help="flow active timeout, seconds (default 120)")
    p.add_argument("--activity-timeout", type=float,
                   help="gap that starts an idle period, seconds (default 5)")
    p.add_argument("--threads", type=int, help="worker threads for feature computation")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("label", help="attach ground-truth labels to a feature CSV")
    common(p)
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.add_argument("--events", required=True, help="ground truth CSV")
    p.add_argument("--out", required=True, help="output labeled CSV path")
    p.set_defaults(func=cmd_label)

    def model_flags(p):
        p.add_argument("--trees", type=int, help="forest size (default 100)")
        p.add_argument("--max-depth", type=int, help="tree depth limit (default 16)")
        p.add_argument("--min-samples-split", type=int, help="minimum node size to split (default 2)")
        p.add_argument("--feature-fraction",
                       help="fraction of features per split, or 'sqrt' (default)")
        p.add_argument("--hidden", help="comma-separated hidden layer sizes (default 64,32,16)")
        p.add_argument("--learning-rate", type=float, help="gradient step size (default 0.05)")
        p.add_argument("--epochs", type=int, help="training epochs (default 60)")
        p.add_argument("--batch-size", type=int, help="mini-batch size (default 32)")

    p = sub.add_parser("train", help="train a model on a labeled CSV and save it")
    common(p)
    p.add_argument("--data", required=True, help="labeled CSV from label")
    p.add_argument("--model", required=True, choices=["rf", "mlp"], help="model kind")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--threads", type=int, help="worker threads for tree training")
    model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated evaluation, or evaluate a saved model")
    common(p)
    p.add_argument("--data", required=True, help="labeled CSV from label")
    p.add_argument("--model", choices=["rf", "mlp"], help="model kind to train per fold")
    p.add_argument("--model-file", help="saved model JSON to evaluate instead of training")
    p.add_argument("--folds", type=int, help="cross-validation folds (default 5)")
    p.add_argument("--out-dir", required=True, help="directory for report files")
    p.add_argument("--threads", type=int, help="worker threads for tree training")
    p.add_argument("--timing-rows", type=int, help="rows used to time single-sample prediction")
    p.add_argument("--timing-repeats", type=int, help="timing repeats; the median is reported")
    model_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="Shapley attributions and global feature ranking")
    common(p)
    p.add_argument("--data", required=True, help="labeled CSV from label")
    p.add_argument("--model-file", required=True, help="saved model JSON from train")
    p.add_argument("--method", choices=["tree", "kernel", "exact"],
                   help="attribution engine (default: tree for forests, kernel otherwise)")
    p.add_argument("--samples", type=int, help="rows to explain (default 500)")
    p.add_argument("--background", type=int, help="background set size (default 100)")
    p.add_argument("--budget", help="kernel coalition budget, or 'full' (default 2048)")
    p.add_argument("--out-dir", required=True, help="directory for explanation artifacts")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("report", help="render metric tables and SVG charts")
    common(p)
    p.add_argument("--reports", nargs="*", help="report CSVs from eval")
    p.add_argument("--rankings", nargs="*", help="ranking CSVs from explain")
    p.add_argument("--out-dir", required=True, help="directory for rendered outputs")
    p.add_argument("--top-k", type=int, help="features per ranking chart (default 20)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FingerprintMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (PcapFormatError, SchemaError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # anything unexpected
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
