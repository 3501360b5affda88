"""Command-line interface: generate, mine, eval, learn-formula.

Exit codes: 0 success, 2 usage or schema problems, 3 the mined policy does
not grant exactly the input authorizations.  Every flag can also be set
through an environment variable prefixed REBAC_MINER_ (dashes become
underscores, e.g. REBAC_MINER_MAX_ITER).  Each command that writes files
also writes a manifest.json recording inputs, configuration, and output
digests; outputs are byte-reproducible given the same inputs and seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy

import rebac_miner
from rebac_miner import _kernels, jsonio
from rebac_miner.datagen import (
    BUILTIN_SPECS,
    builtin_spec,
    generate,
    inject_unknowns,
)
from rebac_miner.features import ExtractionLimits
from rebac_miner.learner import IdStrategy, LearnerConfig, learn_formula
from rebac_miner.metrics import compare_policies
from rebac_miner.miner import (
    MinerConfig,
    MinerError,
    merge_and_simplify,
    mine_detailed,
)
from rebac_miner.model import (
    AclPolicy,
    ModelError,
    Policy,
    meaning,
    sort_rules,
)
from rebac_miner.jsonio import SchemaError
from rebac_miner.tree import build_tree, format_tree

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INCONSISTENT = 3


def _env(flag: str, default=None):
    return os.environ.get("REBAC_MINER_" + flag.replace("-", "_").upper(), default)

def _input_flag(parser, name: str):
    """Required input path, satisfiable by flag or environment variable."""
    from_env = _env(name)
    parser.add_argument(f"--{name}", default=from_env, required=from_env is None)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Manifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.document = {
            "command": command,
            "arguments": {
                k: v for k, v in sorted(vars(args).items()) if k != "func"
            },
            "seed": getattr(args, "seed", None),
            "inputs": {},
            "outputs": {},
            "timingSeconds": {},
            "versions": {
                "rebac-miner": rebac_miner.__version__,
                "python": platform.python_version(),
                "numpy": numpy.__version__,
                "kernel": _kernels.IMPLEMENTATION,
            },
        }
        self._marks: dict[str, float] = {}

    def add_input(self, path):
        path = Path(path)
        self.document["inputs"][str(path)] = _sha256(path)

    def start(self, phase: str):
        self._marks[phase] = time.perf_counter()

    def stop(self, phase: str):
        elapsed = time.perf_counter() - self._marks.pop(phase)
        self.document["timingSeconds"][phase] = round(elapsed, 6)

    def write_output(self, path, text: str):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.document["outputs"][str(path)] = _sha256(path)

    def write(self, path):
        Path(path).write_text(jsonio.dumps(self.document))


def _load_json(path, manifest: _Manifest | None = None):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    if manifest is not None:
        manifest.add_input(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def cmd_generate(args) -> int:
    if args.spec not in BUILTIN_SPECS:
        print(
            f"error: unknown spec {args.spec!r}; available: {sorted(BUILTIN_SPECS)}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    if args.n < 1:
        print("error: --n must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if args.s < 0:
        print("error: --s must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    manifest = _Manifest("generate", args)
    spec = builtin_spec(args.spec)
    manifest.start("generate")
    om, acl = generate(spec, args.n, args.seed)
    degraded = inject_unknowns(om, spec, args.s, args.seed)
    manifest.stop("generate")
    outdir = Path(args.outdir)
    manifest.write_output(
        outdir / "classmodel.json", jsonio.dumps(jsonio.class_model_to_json(spec.class_model))
    )
    manifest.write_output(
        outdir / "objectmodel.json", jsonio.dumps(jsonio.object_model_to_json(degraded))
    )
    manifest.write_output(
        outdir / "groundtruth.json",
        jsonio.dumps(jsonio.rules_to_json(spec.actions, spec.rules)),
    )
    manifest.write_output(outdir / "au.json", jsonio.dumps(jsonio.au_to_json(acl.au)))
    manifest.write(outdir / "manifest.json")
    print(f"wrote {outdir}/classmodel.json objectmodel.json groundtruth.json au.json")
    return EXIT_OK


def _miner_config(args) -> MinerConfig:
    return MinerConfig(
        allow_negation=not args.no_negation,
        id_strategy=(
            IdStrategy.RETRY_WITH_ID_FEATURES
            if args.id_strategy == "retry"
            else IdStrategy.PER_VECTOR_ID_CONJUNCTION
        ),
        limits=ExtractionLimits(
            max_condition_path_len=args.max_cond_len,
            max_constraint_path_len=args.max_cons_len,
            include_id_conditions=args.include_ids,
        ),
        learner=LearnerConfig(max_iter=args.max_iter),
        seed=args.seed,
    )


def cmd_mine(args) -> int:
    manifest = _Manifest("mine", args)
    acl = _load_acl(args, manifest)
    cfg = _miner_config(args)
    manifest.start("mine")
    result = mine_detailed(
        acl, cfg, unknown_as_false=args.naive_unknown_as_false, jobs=args.jobs
    )
    manifest.stop("mine")
    if args.dump_datasets:
        dump_dir = Path(args.dump_datasets)
        for task in result.tasks:
            name = f"{task.subject_type}_{task.resource_type}_{task.action}.csv"
            manifest.write_output(dump_dir / name, jsonio.dataset_to_csv(task.dataset))
    out = Path(args.out)
    manifest.write_output(
        out,
        jsonio.dumps(jsonio.rules_to_json(result.policy.actions, result.policy.rules)),
    )
    manifest.write(out.parent / "manifest.json")
    granted = meaning(result.policy)
    if granted != acl.au:
        missing = sorted(acl.au - granted)
        extra = sorted(granted - acl.au)
        if missing:
            print(f"inconsistent: does not grant {tuple(missing[0])}", file=sys.stderr)
        if extra:
            print(f"inconsistent: also grants {tuple(extra[0])}", file=sys.stderr)
        return EXIT_INCONSISTENT
    print(f"wrote {out} ({len(result.policy.rules)} rules)")
    return EXIT_OK


def _load_acl(args, manifest) -> AclPolicy:
    cm_doc = _load_json(args.classmodel, manifest)
    om_doc = _load_json(args.objectmodel, manifest)
    au_doc = _load_json(args.au, manifest)
    return jsonio.acl_from_documents(cm_doc, om_doc, au_doc)


def cmd_eval(args) -> int:
    manifest = _Manifest("eval", args)
    cm = jsonio.class_model_from_json(_load_json(args.classmodel, manifest))
    om = jsonio.object_model_from_json(_load_json(args.objectmodel, manifest), cm)
    mined_actions, mined_rules = jsonio.rules_from_json(
        _load_json(args.mined, manifest), cm
    )
    ref_actions, ref_rules = jsonio.rules_from_json(
        _load_json(args.reference, manifest), cm
    )
    manifest.start("eval")
    reference = Policy(cm, om, ref_actions, sort_rules(ref_rules))
    ref_acl = AclPolicy(cm, om, ref_actions, meaning(reference))
    simplified = Policy(
        cm, om, ref_actions, merge_and_simplify(ref_rules, ref_acl)
    )
    mined = Policy(cm, om, mined_actions, sort_rules(mined_rules))
    report = compare_policies(mined, simplified)
    manifest.stop("eval")
    out = Path(args.out)
    manifest.write_output(out, jsonio.dumps(jsonio.report_to_json(report)))
    manifest.write(out.parent / "manifest.json")
    print(f"syntactic similarity: {report.syntactic:.4f}")
    print(f"semantic similarity:  {report.semantic:.4f}")
    print(f"wsc mined / reference: {report.wsc_mined} / {report.wsc_reference}")
    for rule, match, score in report.per_rule_best_match:
        print(f"  {score:.3f}  {rule}")
        print(f"         ~ {match}")
    return EXIT_OK


def cmd_learn_formula(args) -> int:
    manifest = _Manifest("learn-formula", args)
    path = Path(args.dataset)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    manifest.add_input(path)
    dataset = jsonio.dataset_from_csv(path.read_text())
    if args.dump_tree:
        print(format_tree(build_tree(dataset)), end="")
    manifest.start("learn")
    result = learn_formula(dataset, LearnerConfig(max_iter=args.max_iter))
    manifest.stop("learn")
    print(str(result.formula))
    if args.out:
        out = Path(args.out)
        document = {
            "formula": [
                [str(lit) for lit in conj.sorted_literals]
                for conj in result.formula.disjuncts
            ],
            "usedFallback": result.used_fallback,
            "iterations": result.iterations,
        }
        manifest.write_output(out, jsonio.dumps(document))
        manifest.write(out.parent / "manifest.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rebac-miner",
        description="Mine concise relationship-based policies from access"
        " control lists over object models with unknown attribute values.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic dataset")
    g.add_argument("--spec", default=_env("spec", "univ-mini"),
                   help=f"one of {sorted(BUILTIN_SPECS)}")
    g.add_argument("--n", type=int, default=int(_env("n", 3)),
                   help="size parameter: class instance counts scale with it")
    g.add_argument("--s", type=float, default=float(_env("s", 0)),
                   help="unknown-injection scaling factor")
    g.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    g.add_argument("--outdir", default=_env("outdir"),
                   required=_env("outdir") is None)
    g.set_defaults(func=cmd_generate)

    m = sub.add_parser("mine", help="mine a policy from an ACL")
    _input_flag(m, "classmodel")
    _input_flag(m, "objectmodel")
    _input_flag(m, "au")
    m.add_argument("--out", "-o", default=_env("out", "policy.json"))
    m.add_argument("--no-negation", action="store_true",
                   default=bool(_env("no_negation")),
                   help="mine negation-free rules")
    m.add_argument("--id-strategy", choices=("retry", "per-vector"),
                   default=_env("id_strategy", "per-vector"))
    m.add_argument("--max-iter", type=int, default=int(_env("max_iter", 5)))
    m.add_argument("--max-cond-len", type=int, default=int(_env("max_cond_len", 2)))
    m.add_argument("--max-cons-len", type=int, default=int(_env("max_cons_len", 3)))
    m.add_argument("--include-ids", action="store_true",
                   default=bool(_env("include_ids")),
                   help="allow identity conditions from the start")
    m.add_argument("--naive-unknown-as-false", action="store_true",
                   default=bool(_env("naive_unknown_as_false")),
                   help="diagnostic: coerce unknown cells to F before learning")
    m.add_argument("--dump-datasets", metavar="DIR",
                   default=_env("dump_datasets"),
                   help="write each task's labeled feature vectors as CSV")
    m.add_argument("--jobs", type=int, default=int(_env("jobs", 1)))
    m.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    m.set_defaults(func=cmd_mine)

    e = sub.add_parser("eval", help="score a mined policy against a reference")
    _input_flag(e, "mined")
    _input_flag(e, "reference")
    _input_flag(e, "classmodel")
    _input_flag(e, "objectmodel")
    e.add_argument("--out", "-o", default=_env("out", "report.json"))
    e.set_defaults(func=cmd_eval)

    lf = sub.add_parser(
        "learn-formula",
        help="learn a DNF formula from a CSV of T/F/U cells with a label column",
    )
    lf.add_argument("dataset")
    lf.add_argument("--max-iter", type=int, default=int(_env("max_iter", 5)))
    lf.add_argument("--dump-tree", action="store_true",
                    help="print the decision tree for the full dataset")
    lf.add_argument("--out", "-o", help="also write the formula as JSON")
    lf.set_defaults(func=cmd_learn_formula)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MinerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
