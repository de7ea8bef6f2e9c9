"""``url2graph`` command line.

Exit codes: 0 success, 1 usage error, 2 data or artifact error.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import corpus
from .errors import Url2GraphError
from .pipeline.adversarial import MODES, AdversarialSpec, perturb_dataset
from .pipeline.checkpoint import digest_file, load_artifacts, load_checkpoint, save_checkpoint
from .pipeline.config import TrainConfig
from .pipeline.training import build_graphs, evaluate, predict, train
from .tokenizer import SubwordVocab, train_subword_vocab

log = logging.getLogger("url2graph")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _label_map(args):
    return corpus.parse_label_map(args.label_map) if args.label_map else None


def _load(path, args):
    return corpus.load_csv(path, _label_map(args), skip_invalid=getattr(args, "skip_invalid", False))


def _write_json(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=False)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _config(args):
    kw = {}
    for f in fields(TrainConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            kw[f.name] = v
    return TrainConfig(**kw)


def _add_config_flags(p, names=None):
    for f in fields(TrainConfig):
        if names is not None and f.name not in names:
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.type is bool:
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=None)
        elif f.type is tuple:
            p.add_argument(flag, type=int, nargs="+", default=None)
        else:
            p.add_argument(flag, type=f.type, default=None, help=f"default {f.default}")


def _figures(args):
    return Path(args.figures) if getattr(args, "figures", None) else None


# ---------------------------------------------------------------- commands


def cmd_stats(args):
    ds = _load(args.data, args)
    st = corpus.class_stats(ds)
    _write_json(st.to_json(), args.out)
    if _figures(args):
        from .plotting import length_histogram_figure
        length_histogram_figure(st, _figures(args) / "length_histogram.png")


def cmd_split(args):
    ds = _load(args.data, args)
    parts = corpus.split(ds, corpus.SplitSpec(*args.fracs, seed=args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "val", "test"), parts):
        corpus.write_csv(part, out / f"{name}.csv")
        log.info("%s: %d records", name, len(part))


def cmd_build_vocab(args):
    ds = _load(args.data, args)
    vocab = train_subword_vocab(ds.urls, args.vocab_size or TrainConfig.vocab_size, args.min_freq or 2)
    vocab.save(args.out)
    log.info("vocab: %d entries -> %s", len(vocab), args.out)


def cmd_build_graphs(args):
    cfg = _config(args)
    ds = _load(args.data, args)
    vocab = SubwordVocab.load(args.vocab)
    g_word, g_char = build_graphs(ds, vocab, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g_word.save(out / "word.graph")
    g_char.save(out / "char.graph")
    log.info("word graph %d nodes / %d edges, char graph %d nodes / %d edges",
             g_word.num_nodes, len(g_word.edges), g_char.num_nodes, len(g_char.edges))


def cmd_train(args):
    cfg = _config(args)
    tr = _load(args.train, args)
    va = _load(args.val, args) if args.val else None
    art = load_artifacts(args.vocab, args.word_graph, args.char_graph, cfg)
    paths = {"vocab": Path(args.vocab).resolve(), "word_graph": Path(args.word_graph).resolve(),
             "char_graph": Path(args.char_graph).resolve()}
    ckpt, history = train(tr, va, cfg, art, paths)
    ckpt.digests = {k: digest_file(v) for k, v in paths.items()}
    save_checkpoint(ckpt, args.out)
    if args.history:
        _write_json(history, args.history)
    if _figures(args):
        from .plotting import history_figure
        history_figure(history, _figures(args) / "training_history.png")
    best = max((h for h in history if h["improved"]), key=lambda h: h["epoch"])
    log.info("best epoch %d (val auc %s) -> %s", best["epoch"], best["val_auc"], args.out)


def _ckpt(args):
    return load_checkpoint(args.checkpoint, args.vocab, args.word_graph, args.char_graph,
                           allow_mismatch=args.allow_digest_mismatch)


def cmd_eval(args):
    ckpt = _ckpt(args)
    ds = _load(args.data, args)
    m, scores, traces = evaluate(ckpt, ds, traces=True)
    out = m.to_json()
    if args.trace:
        out["traces"] = [{"url": u, "score": float(s), "alpha": t.alpha.tolist()}
                         for u, s, t in zip(ds.urls, scores, traces)]
    _write_json(out, args.out)
    if _figures(args):
        from .plotting import gate_figure, roc_figure
        labels = (ds.labels == ckpt.positive_class).astype(int)
        if 0 < labels.sum() < len(labels):
            roc_figure(scores, labels, _figures(args) / "roc.png", title=Path(args.data).name)
        gate_figure([t.alpha for t in traces], ds.labels, _figures(args) / "gate_weights.png", ckpt.class_names)


def _read_urls(path):
    text = Path(path).read_text(encoding="utf-8")
    first = text.splitlines()[0] if text else ""
    if "url" in [c.strip().lower() for c in next(csv.reader([first]), [])]:
        rows = list(csv.DictReader(text.splitlines()))
        key = next(k for k in rows[0] if k.strip().lower() == "url") if rows else "url"
        return [r[key].strip() for r in rows if r.get(key, "").strip()]
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def cmd_predict(args):
    ckpt = _ckpt(args)
    urls = _read_urls(args.data)
    rows = predict(ckpt, urls)
    lines = [f"{u}\t{s:.9g}\t{ckpt.class_names[lab]}\t{a[0]:.9g}\t{a[1]:.9g}\t{a[2]:.9g}"
             for u, (s, lab, a) in zip(urls, rows)]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_perturb(args):
    ds = _load(args.data, args)
    vocab = SubwordVocab.load(args.vocab)
    only = None
    if args.only_label is not None:
        if args.only_label not in ds.class_names:
            raise UsageError(f"--only-label must be one of {ds.class_names}")
        only = ds.class_names.index(args.only_label)
    adv = perturb_dataset(ds, vocab, AdversarialSpec(args.mode, args.ratio, args.seed), only)
    corpus.write_csv(adv, args.out)


def cmd_synth(args):
    from .synth import generate_splits, to_dataset
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = generate_splits(args.n_train, args.n_val, args.n_test, seed=args.seed)
    for name, recs in zip(("train", "val", "test"), parts):
        corpus.write_csv(to_dataset(recs), out / f"{name}.csv")


# ---------------------------------------------------------------- parser


def build_parser():
    p = _Parser(prog="url2graph", description="Dual-granularity URL graph classifier.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def data_cmd(name, fn, help_, data=True):
        sp = sub.add_parser(name, help=help_)
        if data:
            sp.add_argument("--data", required=True, help="CSV with url,label columns")
        sp.add_argument("--label-map", default=None, help="e.g. benign=0,malicious=1")
        sp.add_argument("--skip-invalid", action="store_true", help="drop bad rows instead of failing")
        sp.set_defaults(func=fn)
        return sp

    sp = data_cmd("stats", cmd_stats, "class counts, imbalance ratio, length histogram")
    sp.add_argument("--out", default=None)
    sp.add_argument("--figures", default=None, help="directory for PNG figures")

    sp = data_cmd("split", cmd_split, "stratified seeded train/val/test split")
    sp.add_argument("--fracs", type=float, nargs=3, default=(0.8, 0.1, 0.1), metavar=("TRAIN", "VAL", "TEST"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)

    sp = data_cmd("build-vocab", cmd_build_vocab, "train the subword vocabulary")
    sp.add_argument("--out", required=True)
    sp.add_argument("--vocab-size", "--target-size", dest="vocab_size", type=int, default=None)
    sp.add_argument("--min-freq", type=int, default=None)

    sp = data_cmd("build-graphs", cmd_build_graphs, "build word and char NPMI graphs")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--out-dir", required=True)
    _add_config_flags(sp, {"theta_word", "theta_char", "min_pair_count", "max_subword_len", "max_char_len"})

    sp = data_cmd("train", cmd_train, "train a model", data=False)
    sp.add_argument("--train", required=True)
    sp.add_argument("--val", default=None)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--word-graph", required=True)
    sp.add_argument("--char-graph", required=True)
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.add_argument("--history", default=None, help="per-epoch history JSON")
    sp.add_argument("--figures", default=None)
    _add_config_flags(sp, {f.name for f in fields(TrainConfig)} - {"vocab_size", "min_freq"})

    for name, fn, help_ in (("eval", cmd_eval, "evaluate a checkpoint"), ("predict", cmd_predict, "score URLs")):
        sp = data_cmd(name, fn, help_)
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--vocab", default=None, help="override the recorded vocab path")
        sp.add_argument("--word-graph", default=None)
        sp.add_argument("--char-graph", default=None)
        sp.add_argument("--allow-digest-mismatch", action="store_true")
        if name == "eval":
            sp.add_argument("--figures", default=None)
            sp.add_argument("--trace", action="store_true", help="include per-URL gate weights")

    sp = data_cmd("perturb", cmd_perturb, "adversarial hyphen / duplicate perturbation")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--mode", choices=MODES, default="hyphen")
    sp.add_argument("--ratio", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--only-label", default=None, help="perturb only records with this class name")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("synth", help="write a seeded synthetic corpus")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-train", type=int, default=4000)
    sp.add_argument("--n-val", type=int, default=500)
    sp.add_argument("--n-test", type=int, default=1000)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return 1
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except (Url2GraphError, OSError, ValueError) as err:
        print(f"url2graph: error: {err}", file=sys.stderr)
        return 2
    return 0


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
