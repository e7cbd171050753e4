"""Command-line interface: ``lndmv <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Options can also come from a flat ``key = value`` file given by ``--config``
or the ``LNDMV_CONFIG`` environment variable; command-line flags win.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import corpus as corpus_mod
from . import persist, sweep, synthetic, verify
from .errors import LndmvError
from .evaluation import evaluate, parse_corpus, score_heads
from .model import ParseTree, ValenceConfig
from .neural import NeuralConfig, NeuralModel, load_vectors
from .trainer import INIT_SCHEMES, Mode, TrainConfig, init_params, train

CONFIG_ENV = "LNDMV_CONFIG"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3

# train options and their built-in defaults; flags default to None so that
# "given on the command line" stays distinguishable from config/default values
TRAIN_DEFAULTS = {
    "mode": "soft", "init": ["km"], "max_iters": 50, "ll_tol": 1e-6, "lam": 0.1, "em_batch": 1000,
    "seed": 0, "jobs": 1, "warm_start_epochs": 10, "valence": [2, 2], "checkpoint_every": 0,
}
NEURAL_FLAGS = {
    "lr": float, "momentum": float, "batch": int, "hidden": int, "epochs_per_mstep": int,
    "d_word_in": int, "d_tag_in": int, "d_val": int, "k": int, "k_tag": int, "init_scale": float,
    "vectors": str, "tag_vectors": str,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path):
    """Parse a flat ``key = value`` file ('#' comments) into a dict of strings."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _convert(parser, key, text):
    for action in parser._actions:
        if action.dest == key:
            conv = action.type or str
            if action.nargs in ("+", "*", 2) or isinstance(action.nargs, int):
                return [conv(x) for x in text.split()]
            if isinstance(action, argparse._StoreTrueAction):
                return text.lower() in ("1", "true", "yes", "on")
            value = conv(text)
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config: {key} must be one of {sorted(action.choices)}")
            return value
    return None


def apply_config(args, parser, config):
    """Fill options left unset on the command line from the config file."""
    given = {k for k, v in vars(args).items() if v is not None}
    known = {a.dest for a in parser._actions}
    for key, text in config.items():
        if key in known and key not in given:
            setattr(args, key, _convert(parser, key, text))


def _setup_logging(verbose):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _punct_tags(args):
    return frozenset() if getattr(args, "keep_punct", False) else corpus_mod.PTB_PUNCT_TAGS


# -- commands ----------------------------------------------------------------


def cmd_preprocess(args):
    raw = corpus_mod.read_conll(args.input)
    kept = corpus_mod.strip_and_filter(raw, _punct_tags(args), args.max_len)
    if args.lexicon:
        lex = _load_lexicon(args.lexicon)
    else:
        lex = corpus_mod.build_lexicon(kept, args.cutoff)
    sents = corpus_mod.encode(kept, lex)
    settings = {"cutoff": lex.cutoff, "max_len": args.max_len, "keep_punct": bool(args.keep_punct),
                "source": os.path.basename(args.input)}
    persist.save_corpus(args.output, lex, sents, kept, settings)
    print(f"sentences {len(sents)} (of {len(raw)})")
    print(f"tags {lex.T}")
    print(f"m {lex.m}")
    return EXIT_OK


def _load_lexicon(path):
    try:
        return persist.load_model(path).lexicon
    except LndmvError:
        return persist.load_corpus(path).lexicon


def _strip_like(raw, settings, max_len=None):
    punct = frozenset() if settings.get("keep_punct") else corpus_mod.PTB_PUNCT_TAGS
    return corpus_mod.strip_and_filter(raw, punct, max_len if max_len is not None else settings.get("max_len"))


def _train_options(args):
    opts = {k: getattr(args, k) if getattr(args, k) is not None else v
            for k, v in TRAIN_DEFAULTS.items()}
    mode = Mode(opts["mode"])
    cli_neural = [k for k in NEURAL_FLAGS if getattr(args, k) is not None and k in args._cli_given]
    if mode is not Mode.HARD_NEURAL and cli_neural:
        raise UsageError(f"neural option(s) {', '.join('--' + k.replace('_', '-') for k in cli_neural)} "
                         f"need --mode neural")
    init = opts["init"]
    if init[0] not in INIT_SCHEMES:
        raise UsageError(f"--init must be one of {', '.join(INIT_SCHEMES)}")
    if (init[0] == "trees") != (len(init) == 2) or len(init) > 2:
        raise UsageError("--init trees takes exactly one FILE; other schemes take none")
    return opts, mode


def cmd_train(args):
    opts, mode = _train_options(args)
    data = persist.load_corpus(args.corpus)
    lex, sents = data.lexicon, data.sentences
    vcfg = ValenceConfig(*opts["valence"])
    tcfg = TrainConfig(mode=mode, max_iters=opts["max_iters"], ll_tol=opts["ll_tol"], lam=opts["lam"],
                       em_batch=opts["em_batch"], seed=opts["seed"], n_jobs=opts["jobs"],
                       warm_start_epochs=opts["warm_start_epochs"])
    trees = None
    if opts["init"][0] == "trees":
        tree_raw = _strip_like(corpus_mod.read_conll(opts["init"][1]), data.settings)
        if len(tree_raw) != len(sents) or any(len(a) != len(b) for a, b in zip(tree_raw, sents)):
            raise LndmvError(f"{opts['init'][1]}: sentences do not align with the training corpus")
        trees = [ParseTree.from_conll(r.gold_heads) for r in tree_raw]
    params0 = init_params(opts["init"][0], sents, lex, vcfg, seed=opts["seed"], trees=trees,
                          lam=tcfg.lam)
    model = None
    ncfg = None
    if mode is Mode.HARD_NEURAL:
        nkw = {k: getattr(args, k) for k in NEURAL_FLAGS
               if k not in ("vectors", "tag_vectors") and getattr(args, k) is not None}
        ncfg = NeuralConfig(seed=opts["seed"], **nkw)
        emb = {}
        if args.vectors:
            E_word, E_tag, cov = load_vectors(args.vectors, lex, ncfg, args.tag_vectors)
            emb = {"E_word": E_word, "E_tag": E_tag}
            print(f"vectors: {cov.found} found, {cov.missing} missing")
        model = NeuralModel.for_lexicon(lex, vcfg, ncfg, **emb)
    val = None
    if args.val:
        val = corpus_mod.encode(_strip_like(corpus_mod.read_conll(args.val), data.settings), lex)
    skip = ("jobs", "checkpoint_every")
    meta = {"preprocess": data.settings, "train": {k: v for k, v in opts.items() if k not in skip},
            "neural": ncfg.to_dict() if ncfg else None}

    def checkpoint(it, params, net):
        if opts["checkpoint_every"] and it % opts["checkpoint_every"] == 0:
            root, ext = os.path.splitext(args.model)
            persist.save_model(f"{root}.iter{it}{ext or '.json'}", lex, params, net,
                               dict(meta, iteration=it))

    params, trace, model = train(sents, params0, tcfg, model, val, checkpoint)
    persist.save_model(args.model, lex, params, model, meta)
    if args.trace:
        trace.write_csv(args.trace, timing=args.timing)
    print(f"iterations {len(trace)}")
    print(f"final objective/token {trace.ll[-1]:.6f}")
    if trace.records[-1].val_dda is not None:
        print(f"val DDA {trace.records[-1].val_dda:.4f}")
    return EXIT_OK


def _model_and_sentences(args):
    bundle = persist.load_model(args.model)
    settings = bundle.meta.get("preprocess", {})
    raw = _strip_like(corpus_mod.read_conll(args.input), settings, args.max_len)
    return bundle, raw, corpus_mod.encode(raw, bundle.lexicon)


def cmd_parse(args):
    bundle, raw, sents = _model_and_sentences(args)
    trees = parse_corpus(bundle.params, sents)
    corpus_mod.write_conll(args.output, raw, [t.to_conll() for t in trees])
    print(f"parsed {len(trees)} sentences")
    return EXIT_OK


def cmd_eval(args):
    if (args.model is None) == (args.pred is None):
        raise UsageError("give exactly one of --model or --pred")
    if args.model:
        bundle, raw, sents = _model_and_sentences(args)
        report = evaluate(bundle.params, sents)
    else:
        # parse output is already stripped; stripping again is a no-op
        gold = _strip_like(corpus_mod.read_conll(args.input), {}, args.max_len)
        pred = _strip_like(corpus_mod.read_conll(args.pred), {}, args.max_len)
        if len(gold) != len(pred):
            raise LndmvError(f"{args.pred}: {len(pred)} sentences, gold has {len(gold)}")
        if any(g.gold_heads is None for g in gold):
            raise LndmvError(f"{args.input}: missing gold heads")
        sents = [corpus_mod.Sentence(np.zeros(len(g), dtype=np.int64), np.zeros(len(g), dtype=np.int64),
                                     tuple(g.gold_heads)) for g in gold]
        report = score_heads([p.gold_heads for p in pred], sents)
    sys.stdout.write(report.to_text())
    if args.csv:
        report.write_csv(args.csv)
    return EXIT_OK


def _size(text):
    return text if text == "all" else int(text)


def cmd_sweep(args):
    if args.cutoffs:
        cutoffs = args.cutoffs
    else:
        cutoffs = list(sweep.CHINESE_CUTOFFS if args.lang == "zh" else sweep.ENGLISH_CUTOFFS)
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip().replace("-", "_")
        try:
            overrides[k] = float(v) if any(c in v for c in ".e") else int(v)
        except ValueError:
            raise UsageError(f"--set {k}: not a number: {v!r}") from None
    try:
        spec = sweep.SweepSpec(cutoffs=cutoffs, corpus_sizes=args.sizes, seeds=args.seeds,
                               mode=args.mode, init=args.init, hidden=args.hidden or [None],
                               overrides=overrides, shuffle_seed=args.shuffle_seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    punct = _punct_tags(args)

    def load(path):
        return corpus_mod.strip_and_filter(corpus_mod.read_conll(path), punct, args.max_len) if path else None

    train_raw, test_raw, val_raw = load(args.train), load(args.test), load(args.val)
    t0 = time.perf_counter()
    rows = sweep.run_sweep(spec, train_raw, test_raw, val_raw, args.out, args.jobs,
                           on_row=lambda r: logging.getLogger("lndmv.sweep").info("%s", r))
    failed = sum(r["status"] != "ok" for r in rows if r["seed"] != "mean")
    print(f"cells {spec.n_cells}, rows {len(rows)}, failed {failed}, "
          f"{time.perf_counter() - t0:.1f}s -> {args.out}")
    return EXIT_OK


def cmd_verify(args):
    report = verify.run_checks(args.cases, args.seed, args.inject_fault)
    print(report.to_text())
    print("all checks passed" if report.passed else "VERIFICATION FAILED")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_synth(args):
    os.makedirs(args.out, exist_ok=True)
    sizes = {"train": args.train_size, "val": args.val_size, "test": args.test_size}
    paths = synthetic.write_benchmark(args.out, args.seed, sizes)
    for split, path in paths.items():
        print(f"{split} {path}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="lndmv", description="Unsupervised lexicalized dependency grammar induction.")
    p.add_argument("--config", help=f"key=value defaults file (default: ${CONFIG_ENV})")
    p.add_argument("-v", "--verbose", action="store_true", default=None)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", help="strip punctuation, filter by length, build lexicon, encode")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True, help="encoded corpus (JSON)")
    s.add_argument("--cutoff", type=int, default=None, help="min (word, POS) count to lexicalize")
    s.add_argument("--max-len", type=int, default=None)
    s.add_argument("--keep-punct", action="store_true", default=None)
    s.add_argument("--lexicon", help="reuse the lexicon of a corpus or model file")
    s.set_defaults(func=cmd_preprocess, _defaults={"cutoff": 100000})

    s = sub.add_parser("train", help="run EM and write a model file")
    s.add_argument("--corpus", required=True, help="preprocessed corpus")
    s.add_argument("--model", required=True, help="output model file")
    s.add_argument("--trace", help="per-iteration CSV")
    s.add_argument("--val", help="CoNLL validation file (gold heads) scored each iteration")
    s.add_argument("--mode", choices=[m.value for m in Mode])
    s.add_argument("--init", nargs="+", metavar="SCHEME",
                   help="km | uniform | random | trees FILE | tabular")
    s.add_argument("--max-iters", type=int)
    s.add_argument("--ll-tol", type=float)
    s.add_argument("--lam", type=float, help="add-lambda smoothing")
    s.add_argument("--em-batch", type=int, help="sentences per neural EM iteration")
    s.add_argument("--warm-start-epochs", type=int)
    s.add_argument("--valence", type=int, nargs=2, metavar=("VC", "VD"))
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, help="E-step threads")
    s.add_argument("--checkpoint-every", type=int)
    s.add_argument("--timing", action="store_true", default=None,
                   help="record wall time in the trace (breaks byte-identical reruns)")
    g = s.add_argument_group("neural (--mode neural only)")
    for name, conv in NEURAL_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), type=conv)
    s.set_defaults(func=cmd_train)

    for name, func, help_ in (("parse", cmd_parse, "write Viterbi heads as CoNLL"),
                              ("eval", cmd_eval, "directed dependency accuracy")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--input", required=True, help="CoNLL input (gold heads for eval)")
        s.add_argument("--model")
        s.add_argument("--max-len", type=int, help="override the model's length filter")
        if name == "parse":
            s.add_argument("--output", required=True)
        else:
            s.add_argument("--pred", help="score a predicted CoNLL file instead of a model")
            s.add_argument("--csv", help="per-sentence CSV")
        s.set_defaults(func=func)

    s = sub.add_parser("sweep", help="grid over cutoffs x corpus sizes x seeds")
    s.add_argument("--train", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--val")
    s.add_argument("--out", required=True, help="results CSV")
    s.add_argument("--lang", choices=["en", "zh"], help="default cutoff grid")
    s.add_argument("--cutoffs", type=int, nargs="+")
    s.add_argument("--sizes", type=_size, nargs="+", help="training-set prefix sizes or 'all'")
    s.add_argument("--seeds", type=int, nargs="+")
    s.add_argument("--mode", choices=[m.value for m in Mode])
    s.add_argument("--init", choices=[x for x in INIT_SCHEMES if x != "trees"])
    s.add_argument("--hidden", type=int, nargs="+", help="neural hidden sizes (an extra axis)")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="training/neural override")
    s.add_argument("--max-len", type=int)
    s.add_argument("--keep-punct", action="store_true", default=None)
    s.add_argument("--shuffle-seed", type=int)
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_sweep, _defaults={"lang": "en", "sizes": ["all"], "seeds": [0, 1, 2],
                                              "mode": "soft", "init": "km", "shuffle_seed": 0,
                                              "jobs": 1})

    s = sub.add_parser("verify", help="chart-vs-enumeration and gradient checks")
    s.add_argument("--cases", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--inject-fault", action="store_true", default=None,
                   help="flip a gradient sign (the run must fail)")
    s.set_defaults(func=cmd_verify, _defaults={"cases": 200, "seed": 0})

    s = sub.add_parser("synth", help="write the synthetic benchmark splits")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    for split, n in synthetic.SHIPPED_SIZES.items():
        s.add_argument(f"--{split}-size", type=int, default=None)
    s.set_defaults(func=cmd_synth, _defaults={"seed": synthetic.SHIPPED_SEED,
                                              **{f"{k}_size": v for k, v in synthetic.SHIPPED_SIZES.items()}})
    return p


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args._cli_given = {k for k, v in vars(args).items() if v is not None}
        _setup_logging(args.verbose)
        config_path = args.config or os.environ.get(CONFIG_ENV)
        if config_path:
            apply_config(args, _subparser(parser, args.command), read_config(config_path))
        for k, v in getattr(args, "_defaults", {}).items():
            if getattr(args, k, None) is None:
                setattr(args, k, v)
        return args.func(args)
    except UsageError as exc:
        print(f"lndmv: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LndmvError, OSError, ValueError) as exc:
        print(f"lndmv: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
