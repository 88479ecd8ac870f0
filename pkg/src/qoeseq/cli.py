"""``qoeseq`` command-line interface.

Each pipeline phase is its own subcommand; ``pipeline`` chains them. Every
run writes a manifest (config snapshot, seed, artifact hashes). Failures exit
nonzero with one JSON line on stderr: ``{"error": <code>, "message": ...}``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import serialization as ser
from .config import BUNDLED_SPEC, PipelineConfig, build_config, bundled_spec_text, load_config_file
from .errors import ConfigInvalid, FileMissing, QoeSeqError, SchemaMismatch
from .evaluation import compare_models, confusion, measure_latency, metrics, write_comparison
from .hmm import (
    HmmParams,
    LabeledSequence,
    fit_supervised,
    posterior_entropy,
    posterior_marginals,
    sample_sequence,
    viterbi_decode,
)
from .ingest import (
    Dataset,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    split_sessions,
    synthesize_dataset,
    write_csv,
)
from .pipeline import encode_features, fit_pipeline
from .vq import binning_fit, kmeans_fit

# outputs whose bytes depend on wall-clock timing
NONDETERMINISTIC = ("comparison.csv", "bench.json")


# ---------------------------------------------------------------------------
# helpers


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _derived_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1, dtype=np.uint64)[0])


def _load_dataset_source(cfg: PipelineConfig) -> tuple[Dataset, Dataset]:
    """Resolve the configured data source into a (train, test) pair."""
    if cfg.train_csv is not None:
        return load_csv(cfg.train_csv, num_states=cfg.states), load_csv(cfg.test_csv, num_states=cfg.states)
    if cfg.data_csv is not None:
        data = load_csv(cfg.data_csv, num_states=cfg.states)
    else:
        if cfg.synth_spec is None or cfg.synth_spec == BUNDLED_SPEC:
            spec = ser.from_document(json.loads(bundled_spec_text()), "generator_spec")
        else:
            spec = ser.load(cfg.synth_spec, "generator_spec")
        data = synthesize_dataset(spec, cfg.seed)
        data = Dataset(data.sessions, data.feature_names, cfg.states)
    return split_sessions(data, cfg.test_fraction, cfg.seed)


def _read_token_csv(path: str | Path) -> tuple[list[str], dict[str, dict[str, np.ndarray]]]:
    """Rows ``session_id, t, token[, state]`` grouped per session, sorted by t."""
    path = Path(path)
    if not path.is_file():
        raise FileMissing(str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if not {"session_id", "t", "token"} <= set(cols):
            raise SchemaMismatch(f"{path}: token file needs session_id, t, token columns")
        rows: dict[str, list[tuple[int, int, int | None]]] = {}
        for r in reader:
            state = int(r["state"]) if r.get("state") not in (None, "") else None
            rows.setdefault(r["session_id"], []).append((int(r["t"]), int(r["token"]), state))
    out = {}
    for sid, items in rows.items():
        items.sort()
        if [t for t, _, _ in items] != list(range(len(items))):
            raise SchemaMismatch(f"{path}: session {sid!r} timesteps are not 0..T-1")
        out[sid] = {"tokens": np.array([k for _, k, _ in items], dtype=np.int64),
                    "states": None if any(s is None for _, _, s in items)
                    else np.array([s for _, _, s in items], dtype=np.int64)}
    return cols, out


def _is_token_csv(path: str | Path) -> bool:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    return "token" in [h.strip() for h in header]


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_manifest(target: Path, command: str, cfg: PipelineConfig, artifacts: Sequence[Path],
                    root: Path | None = None) -> Path:
    """``root/manifest.json`` for directory outputs, ``<file>.manifest.json`` otherwise."""
    if root is not None:
        mpath = root / "manifest.json"
        base = root
    else:
        mpath = target.with_name(target.name + ".manifest.json")
        base = target.parent
    entries = {}
    for p in sorted(set(artifacts)):
        entries[str(p.relative_to(base))] = ser.file_sha256(p)
    doc = {
        "version": ser.FORMAT_VERSION,
        "tool_version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "artifacts": entries,
        "nondeterministic": sorted(k for k in entries if Path(k).name in NONDETERMINISTIC),
    }
    mpath.parent.mkdir(parents=True, exist_ok=True)
    mpath.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return mpath


def _check_pairing(model: HmmParams, discretizer) -> None:
    if discretizer.alphabet_size != model.alphabet_size:
        raise SchemaMismatch(f"model alphabet V={model.alphabet_size} but discretizer has "
                             f"{discretizer.alphabet_size} tokens")
    if model.codebook_ref is not None and model.codebook_ref != ser.document_ref(discretizer):
        raise SchemaMismatch("model was fitted against a different codebook")


def _load_discretizer(path: str | Path):
    doc = ser.read_json(path)
    if doc.get("model_type") not in ("codebook", "binning"):
        raise SchemaMismatch(f"{path}: expected a codebook or binning artifact")
    return ser.from_document(doc)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(cfg: PipelineConfig, args) -> int:
    out = Path(cfg.out)
    train, test = _load_dataset_source(cfg)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "train.csv", out / "test.csv", out / "standardizer.json"]
    write_csv(train, paths[0])
    write_csv(test, paths[1])
    ser.save(fit_standardizer(train), paths[2])
    _write_manifest(out, "ingest", cfg, paths, root=out)
    _emit({"train_sessions": len(train.sessions), "test_sessions": len(test.sessions),
           "train_records": train.num_records, "test_records": test.num_records,
           "features": train.feature_names, "states": train.num_states})
    return 0


def cmd_fit_vq(cfg: PipelineConfig, args) -> int:
    out = Path(cfg.out)
    train = load_csv(args.train, num_states=cfg.states)
    std = fit_standardizer(train)
    z = apply_standardizer(train, std).stacked_features()
    codebook = kmeans_fit(z, cfg.codebook_size, seed=cfg.seed, max_iters=cfg.max_iters, tol=cfg.tol)
    codebook.standardizer = std
    scheme = binning_fit(z, cfg.bins)
    scheme.standardizer = std
    paths = [ser.save(codebook, out / "codebook.json"), ser.save(scheme, out / "binning.json")]
    _write_manifest(out, "fit-vq", cfg, paths, root=out)
    _emit({"K": codebook.K, "D": codebook.D, "inertia": codebook.inertia, "iterations": codebook.n_iter,
           "quantization_error": codebook.quantization_error(z), "binning_alphabet": scheme.alphabet_size})
    return 0


def cmd_encode(cfg: PipelineConfig, args) -> int:
    data = load_csv(args.input, num_states=cfg.states)
    disc = _load_discretizer(args.codebook)
    out = Path(args.output)
    labeled = all(s.labeled for s in data.sessions)
    rows = []
    for s in data.sessions:
        tokens = encode_features(disc, s.features)
        states = s.states(cfg.states) if labeled else None
        for t, tok in enumerate(tokens):
            rows.append([s.session_id, t, int(tok)] + ([int(states[t])] if labeled else []))
    _write_rows(out, ["session_id", "t", "token"] + (["state"] if labeled else []), rows)
    _write_manifest(out, "encode", cfg, [out])
    return 0


def cmd_fit_hmm(cfg: PipelineConfig, args) -> int:
    disc = _load_discretizer(args.codebook)
    _, seqs = _read_token_csv(args.tokens)
    if any(v["states"] is None for v in seqs.values()):
        raise SchemaMismatch("fit-hmm needs a state column on every row")
    labeled = [LabeledSequence(v["tokens"], v["states"]) for v in seqs.values()]
    model = fit_supervised(labeled, cfg.states, disc.alphabet_size, cfg.alpha)
    model.codebook_ref = ser.document_ref(disc)
    out = Path(args.output)
    ser.save(model, out)
    _write_manifest(out, "fit-hmm", cfg, [out])
    _emit({"S": model.num_states, "V": model.alphabet_size, "pi": model.pi.tolist(), "A": model.A.tolist()})
    return 0


def cmd_decode(cfg: PipelineConfig, args) -> int:
    model = ser.load(args.model, "hmm")
    disc = _load_discretizer(args.codebook) if args.codebook else None
    if disc is not None:
        _check_pairing(model, disc)
    if _is_token_csv(args.input):
        _, seqs = _read_token_csv(args.input)
    else:
        if disc is None:
            raise SchemaMismatch("decoding raw features needs --codebook")
        data = load_csv(args.input, num_states=model.num_states)
        seqs = {s.session_id: {"tokens": encode_features(disc, s.features),
                               "states": s.states(model.num_states) if s.labeled else None}
                for s in data.sessions}
    labeled = all(v["states"] is not None for v in seqs.values())
    rows = []
    for sid, v in seqs.items():
        dec = viterbi_decode(model, v["tokens"])
        try:
            ent = posterior_entropy(posterior_marginals(model, v["tokens"]))
        except QoeSeqError:
            ent = np.full(len(v["tokens"]), np.nan)
        for t in range(len(v["tokens"])):
            row = [sid, t, int(v["tokens"][t]), int(dec.states[t]), repr(float(ent[t]))]
            if labeled:
                row.append(int(v["states"][t]))
            rows.append(row)
    out = Path(args.output)
    header = ["session_id", "t", "token", "predicted_state", "posterior_entropy"]
    _write_rows(out, header + (["true_state"] if labeled else []), rows)
    _write_manifest(out, "decode", cfg, [out])
    return 0


def cmd_evaluate(cfg: PipelineConfig, args) -> int:
    path = Path(args.decoded)
    if not path.is_file():
        raise FileMissing(str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"true_state", "predicted_state"} <= set(reader.fieldnames or []):
            raise SchemaMismatch("evaluate needs true_state and predicted_state columns")
        pairs = [(int(r["true_state"]), int(r["predicted_state"])) for r in reader]
    y, yhat = zip(*pairs) if pairs else ((), ())
    cm = confusion(y, yhat, cfg.states)
    report = metrics(cm).to_dict()
    report["confusion"] = cm.counts.tolist()
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, "evaluate", cfg, [out])
    _emit({k: report[k] for k in ("accuracy", "macro_precision", "macro_recall", "macro_f1")})
    return 0


def cmd_generate(cfg: PipelineConfig, args) -> int:
    model = ser.load(args.model, "hmm")
    rows = []
    for n in range(args.sessions):
        seq = sample_sequence(model, args.length, _derived_seed(cfg.seed, n))
        rows.extend([f"g{n}", t, int(seq.tokens[t]), int(seq.states[t])] for t in range(len(seq)))
    out = Path(args.output)
    _write_rows(out, ["session_id", "t", "token", "state"], rows)
    _write_manifest(out, "generate", cfg, [out])
    return 0


def cmd_bench(cfg: PipelineConfig, args) -> int:
    model = ser.load(args.model, "hmm")
    tokens = sample_sequence(model, args.length, cfg.seed).tokens
    report = measure_latency(lambda obs: viterbi_decode(model, obs), tokens, cfg.reps, cfg.warmup)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {"model": str(args.model), "S": model.num_states, "V": model.alphabet_size, **report.to_dict()}
    out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _write_manifest(out, "bench", cfg, [out])
    _emit(doc)
    return 0


def cmd_pipeline(cfg: PipelineConfig, args) -> int:
    out = Path(cfg.out)
    train, test = _load_dataset_source(cfg)
    written = [out / "data" / "train.csv", out / "data" / "test.csv"]
    written[0].parent.mkdir(parents=True, exist_ok=True)
    write_csv(train, written[0])
    write_csv(test, written[1])

    fitted = fit_pipeline(train, cfg.codebook_size, cfg.bins, cfg.alpha, cfg.seed, cfg.max_iters, cfg.tol)
    models = out / "models"
    fitted.vq_hmm.codebook_ref = ser.document_ref(fitted.codebook)
    fitted.binned_hmm.codebook_ref = ser.document_ref(fitted.binning)
    written += [
        ser.save(fitted.codebook, models / "codebook.json"),
        ser.save(fitted.binning, models / "binning.json"),
        ser.save(fitted.vq_hmm, models / "vq_hmm.json"),
        ser.save(fitted.binned_hmm, models / "binned_hmm.json"),
        ser.save(fitted.token_classifier, models / "token_classifier.json"),
        ser.save(fitted.gnb, models / "gaussian_nb.json"),
    ]
    comp = compare_models(test, fitted.predictors(), cfg.reps, cfg.warmup)
    written += list(write_comparison(comp, out).values())
    _write_manifest(out, "pipeline", cfg, written, root=out)
    _emit(comp.table_rows(include_literature=False))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file (or a run manifest)")
    p.add_argument("--seed", type=int)
    p.add_argument("--states", type=int, help="number of QoE states S")
    p.add_argument("--codebook-size", type=int, dest="codebook_size", help="k-means codebook size K")
    p.add_argument("--bins", type=int, help="bins per feature for the binned baseline")
    p.add_argument("--alpha", type=float, help="additive smoothing")
    p.add_argument("--out", help="output directory")
    p.add_argument("--reps", type=int, help="timed repetitions")
    p.add_argument("--warmup", type=int, help="untimed warmup calls")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="qoeseq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qoeseq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def source_flags(p):
        p.add_argument("--input", dest="data_csv", help="labeled telemetry CSV to split")
        p.add_argument("--train", dest="train_csv", help="pre-split training CSV")
        p.add_argument("--test", dest="test_csv", help="pre-split test CSV")
        p.add_argument("--synth", dest="synth_spec", help="generator spec JSON ('bundled' for the default)")
        p.add_argument("--test-fraction", type=float, dest="test_fraction")

    p = sub.add_parser("ingest", parents=[common], help="validate, split and standardize a dataset")
    source_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit-vq", parents=[common], help="fit the k-means codebook and binning scheme")
    p.add_argument("--train", required=True)
    p.set_defaults(func=cmd_fit_vq)

    p = sub.add_parser("encode", parents=[common], help="map feature rows to tokens")
    p.add_argument("--input", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("fit-hmm", parents=[common], help="supervised HMM estimation from labeled tokens")
    p.add_argument("--tokens", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fit_hmm)

    p = sub.add_parser("decode", parents=[common], help="Viterbi-decode token or feature sequences")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--codebook")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", parents=[common], help="metrics from a decoded CSV")
    p.add_argument("--decoded", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", parents=[common], help="sample synthetic labeled sequences")
    p.add_argument("--model", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--sessions", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", parents=[common], help="Viterbi decode latency")
    p.add_argument("--model", required=True)
    p.add_argument("--length", type=int, default=300)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pipeline", parents=[common], help="ingest -> fit -> decode -> evaluate")
    source_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


_CONFIG_KEYS = {"seed", "states", "codebook_size", "bins", "alpha", "out", "reps", "warmup",
                "data_csv", "train_csv", "test_csv", "synth_spec", "test_fraction"}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = load_config_file(args.config) if args.config else None
        overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_KEYS}
        cfg = build_config(file_values, overrides)
        if getattr(args, "length", 1) < 1 or getattr(args, "sessions", 1) < 1:
            raise ConfigInvalid("--length and --sessions must be >= 1")
        return args.func(cfg, args)
    except QoeSeqError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "FileMissing", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
