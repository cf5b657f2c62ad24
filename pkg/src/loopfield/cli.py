"""Command-line interface.

Subcommands: generate, occupation, distance, discretize, reconstruct,
verify.  Every run is reproducible from its flags: fixed seeds, fixed
enumeration orders, and fixed number formatting make reports byte-identical
across repeated invocations.  Validation and domain errors exit 1; campaign
findings (for example unseparated pairs) exit 2.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import loopio
from .discretize import (
    build_partition,
    convergence_experiment,
    finite_partition,
    induced_discrete_loop,
    trace_time_change,
    verify_trace_identity,
)
from .errors import LoopfieldError, ValidationError
from .loops import (
    BasedLoop,
    Loop,
    canonical_based,
    generate_random_loop,
    random_based_loop,
)
from .metric import based_distance, loop_distance, translation_continuity_probe
from .occupation import monte_carlo_occupation, multi_occupation, occupation_measure
from .reconstruct import LoopOracle, TableOracle, reconstruct_loop, verify_injectivity
from .spaces import StateSpace

_DEFAULT_CAMPAIGN_LABELS = ("a", "b", "c", "d", "e")


def _fmt(x: float) -> str:
    return f"{x:.9f}"


def _emit(args, payload: dict, text_lines: list[str], *, to_stdout: bool = False) -> None:
    if args.format == "json":
        out = loopio.dump_json(payload)
    else:
        out = "".join(line + "\n" for line in text_lines)
    path = None if to_stdout else getattr(args, "out", None)
    if path:
        loopio.atomic_write_text(path, out)
    else:
        sys.stdout.write(out)


def _as_based(l, name: str) -> BasedLoop:
    if isinstance(l, BasedLoop):
        return l
    return canonical_based(l)


def _as_loop(l) -> Loop:
    return l.loop if isinstance(l, BasedLoop) else l


def _space_from_args(args) -> StateSpace:
    if args.dim is not None:
        return StateSpace.euclidean(args.dim)
    if not args.labels:
        raise ValidationError("give either --labels or --dim")
    labels = [s.strip() for s in args.labels.split(",")]
    dist = None
    if args.dist:
        dist = [
            [float(x) for x in row.split(",")] for row in args.dist.split(";")
        ]
    return StateSpace.finite(labels, dist)


def cmd_generate(args) -> int:
    space = _space_from_args(args)
    if args.based:
        loop = random_based_loop(space, args.segments, args.seed)
    else:
        loop = generate_random_loop(space, args.segments, args.seed)
    payload = loopio.loop_to_json(loop)
    out = loopio.dump_json(payload)
    if args.out:
        loopio.atomic_write_text(args.out, out)
    else:
        sys.stdout.write(out)
    if args.figure:
        from . import plots

        plots.save_figure(plots.figure_loop(loop, "generated loop"), args.figure)
    return 0


def cmd_occupation(args) -> int:
    l = _as_loop(loopio.read_loop(args.loop))
    pattern = loopio.parse_pattern(args.pattern, l.space)
    value = multi_occupation(l, pattern)
    payload = {"value": value}
    lines = [_fmt(value)]
    if args.mc_samples:
        est, err = monte_carlo_occupation(l, pattern, args.mc_samples, args.seed)
        payload["mc_estimate"] = est
        payload["mc_stderr"] = err
        lines.append(f"mc {_fmt(est)} {_fmt(err)}")
    _emit(args, payload, lines)
    if args.figure:
        from . import plots

        plots.save_figure(plots.figure_loop(l, "loop"), args.figure)
    return 0


def cmd_distance(args) -> int:
    a = loopio.read_loop(args.a)
    b = loopio.read_loop(args.b)
    if args.quotient:
        res = loop_distance(_as_loop(a), _as_loop(b), refine_steps=args.refine)
    else:
        res = based_distance(_as_based(a, "a"), _as_based(b, "b"))
    payload = {"value": res.value, "certified_upper_bound": res.certified_upper_bound}
    if res.witness_offset is not None:
        payload["witness_offset"] = res.witness_offset
    lines = [_fmt(res.value)]
    _emit(args, payload, lines)
    if args.witness:
        witness = {
            "value": res.value,
            "lambda": [list(p) for p in res.witness_lambda.points]
            if res.witness_lambda
            else None,
            "offset": res.witness_offset,
        }
        loopio.atomic_write_text(args.witness, loopio.dump_json(witness))
    if args.figure and res.witness_lambda is not None:
        from . import plots
        from .loops import normalize
        from .metric import _profile

        an = normalize(_as_based(a, "a"))
        bn = normalize(_as_based(b, "b"))
        fig = plots.figure_alignment(
            res.witness_lambda.points,
            _profile(an)[0],
            _profile(bn)[0],
            title=f"distance {_fmt(res.value)}",
        )
        plots.save_figure(fig, args.figure)
    return 0


def cmd_discretize(args) -> int:
    l = loopio.read_loop(args.loop)
    bl = _as_based(l, "loop")
    if bl.space.kind == "euclidean":
        if args.eps is None:
            raise ValidationError("--eps is required for euclidean loops")
        m = occupation_measure(bl.loop)
        part = build_partition(m, args.eps, args.seed)
    else:
        part = finite_partition(bl.space)
    induced = induced_discrete_loop(bl, part)
    tc = trace_time_change(bl, part)
    identity_ok = verify_trace_identity(bl, part, args.max_n)
    if args.out:
        loopio.write_loop(args.out, induced)
    if bl.space.kind == "euclidean":
        cells = [
            {"lo": list(c.lo), "hi": list(c.hi), "label": lab,
             "representative": list(rep)}
            for c, lab, rep in zip(part.cells, part.labels, part.representatives)
        ]
    else:
        cells = [
            {"label": lab, "representative": rep}
            for lab, rep in zip(part.labels, part.representatives)
        ]
    report = {
        "epsilon": None if part.epsilon == float("inf") else part.epsilon,
        "margin": part.margin,
        "cells": cells,
        "t_eps": tc.t_eps,
        "trace_identity": identity_ok,
        "induced_word_length": len(induced.word),
    }
    if args.report:
        loopio.atomic_write_text(args.report, loopio.dump_json(report))
    lines = [
        f"cells {len(part.cells)}",
        f"t_eps {_fmt(tc.t_eps)}",
        f"trace_identity {'pass' if identity_ok else 'FAIL'}",
    ]
    _emit(args, report, lines, to_stdout=True)
    if args.figure:
        from . import plots

        fig = plots.figure_loop(induced, "induced discrete loop")
        plots.save_figure(fig, args.figure)
    return 0 if identity_ok else 2


def cmd_reconstruct(args) -> int:
    if bool(args.oracle) == bool(args.loop):
        raise ValidationError("give exactly one of --oracle or --loop")
    if args.oracle:
        entries = loopio.read_oracle_table(args.oracle)
        oracle = TableOracle(entries)
        if not args.labels:
            raise ValidationError("--labels is required with --oracle")
        labels = [s.strip() for s in args.labels.split(",")]
        space = StateSpace.finite(labels)
    else:
        src = _as_loop(loopio.read_loop(args.loop))
        if src.space.kind != "finite":
            raise ValidationError(
                "reconstruction needs a finite alphabet; discretize first"
            )
        oracle = LoopOracle(src)
        space = src.space
    result = reconstruct_loop(oracle, space, q_max=args.qmax, tol=args.tol,
                              seed=args.seed)
    if args.out:
        loopio.write_loop(args.out, result.loop)
    payload = {
        "residual": result.residual,
        "candidates_tried": result.candidates_tried,
        "oracle_calls": oracle.calls,
        "word": [[seg.state, seg.hold] for seg in result.loop.word],
    }
    lines = [
        "word " + " ".join(f"{seg.state}:{_fmt(seg.hold)}" for seg in result.loop.word),
        f"residual {result.residual:.3e}",
        f"candidates_tried {result.candidates_tried}",
    ]
    _emit(args, payload, lines, to_stdout=True)
    if args.figure:
        from . import plots

        plots.save_figure(plots.figure_loop(result.loop, "reconstructed loop"), args.figure)
    return 0


def _campaign_space(args) -> StateSpace:
    if args.labels:
        return StateSpace.finite([s.strip() for s in args.labels.split(",")])
    return StateSpace.finite(_DEFAULT_CAMPAIGN_LABELS)


def _suite_injectivity(args):
    space = _campaign_space(args)
    report = verify_injectivity(
        space,
        trials=args.trials,
        max_segments=args.max_segments,
        n_max=args.nmax,
        seed=args.seed,
    )
    payload = {
        "suite": "injectivity",
        "claim": "distinct loops are separated by a short occupation pattern",
        "config": {
            "trials": args.trials,
            "labels": list(space.labels),
            "max_segments": args.max_segments,
            "n_max": args.nmax,
            "seed": args.seed,
        },
        "separated": report.separated,
        "unseparated": report.unseparated,
        "equivalent": report.equivalent,
        "equivalent_mismatches": report.equivalent_mismatches,
        "shortest_separator_histogram": {
            str(k): v for k, v in report.shortest_separator_histogram.items()
        },
        "unseparated_pairs": [list(p) for p in report.unseparated_pairs],
    }
    lines = [
        f"separated {report.separated}",
        f"unseparated {report.unseparated}",
        f"equivalent {report.equivalent}",
        f"equivalent_mismatches {report.equivalent_mismatches}",
    ] + [
        f"separator_length {k} {v}"
        for k, v in report.shortest_separator_histogram.items()
    ]
    findings = report.findings
    figure = None
    if args.figure:
        from . import plots

        figure = plots.figure_histogram(report.shortest_separator_histogram)
    return payload, lines, findings, figure


def _suite_occupation(args):
    space = _campaign_space(args)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    failures = 0
    rows = []
    for trial in range(args.trials):
        segs = int(rng.integers(1, 7))
        if len(space.labels) >= 2 and segs == 1:
            segs = 2
        if len(space.labels) == 2 and segs % 2:
            segs += 1
        loop = generate_random_loop(space, segs, int(rng.integers(2**62)))
        n = int(rng.integers(1, 4))
        cells = tuple(
            space.labels[int(rng.integers(len(space.labels)))] for _ in range(n)
        )
        from .occupation import Pattern

        pattern = Pattern(cells)
        exact = multi_occupation(loop, pattern)
        est, err = monte_carlo_occupation(
            loop, pattern, args.mc_samples, int(rng.integers(2**62))
        )
        tol = max(4.0 * err, 1e-6 * loop.duration**n)
        gap = abs(exact - est)
        ok = gap <= tol
        failures += 0 if ok else 1
        worst = max(worst, gap / tol if tol > 0 else 0.0)
        rows.append((trial, exact, est, err, ok))
    payload = {
        "suite": "occupation",
        "claim": "the exact occupation values match a Monte Carlo quadrature",
        "config": {
            "trials": args.trials,
            "mc_samples": args.mc_samples,
            "labels": list(space.labels),
            "seed": args.seed,
        },
        "failures": failures,
        "worst_gap_over_tolerance": worst,
    }
    lines = [f"failures {failures}", f"worst_gap_over_tolerance {_fmt(worst)}"] + [
        f"trial {t} exact {_fmt(ex)} mc {_fmt(es)} stderr {_fmt(er)} "
        f"{'pass' if ok else 'FAIL'}"
        for t, ex, es, er, ok in rows
    ]
    return payload, lines, failures > 0, None


def _suite_probe(args):
    space = _campaign_space(args)
    rng = np.random.default_rng(args.seed)
    hs = [0.1 * 2.0**-k for k in range(11)]
    worst_final = 0.0
    failures = 0
    curves = []
    for trial in range(args.trials):
        while True:
            segs = int(rng.integers(2, 7))
            if len(space.labels) == 2 and segs % 2:
                continue
            loop = generate_random_loop(space, segs, int(rng.integers(2**62)))
            k = max(range(len(loop.word)), key=lambda i: loop.word[i].hold)
            if loop.word[k].hold >= 0.3:
                break
        bounds = loop.boundaries()
        bl = BasedLoop(loop, bounds[k] + 0.5 * loop.word[k].hold)
        values = translation_continuity_probe(bl, hs)
        monotone = all(
            values[i + 1] <= values[i] + 1e-6 for i in range(len(values) - 1)
        )
        ok = monotone and values[-1] < 1e-3
        failures += 0 if ok else 1
        worst_final = max(worst_final, values[-1])
        curves.append(values)
    payload = {
        "suite": "probe",
        "claim": "the based distance of a loop to its small circular shifts "
                 "decreases to zero",
        "config": {"trials": args.trials, "seed": args.seed,
                   "shifts": hs, "labels": list(_campaign_space(args).labels)},
        "failures": failures,
        "worst_final_value": worst_final,
    }
    lines = [f"failures {failures}", f"worst_final_value {_fmt(worst_final)}"]
    figure = None
    if args.figure:
        from . import plots
        import numpy as _np

        figure = plots.figure_probe(hs, list(_np.mean(_np.array(curves), axis=0)))
    return payload, lines, failures > 0, figure


def _suite_convergence(args):
    if not (args.a and args.b):
        raise ValidationError("--suite convergence needs --a and --b")
    if not args.eps_ladder:
        raise ValidationError("--suite convergence needs --eps-ladder")
    la = _as_based(loopio.read_loop(args.a), "a")
    lb = _as_based(loopio.read_loop(args.b), "b")
    ladder = [float(x) for x in args.eps_ladder.split(",")]
    report = convergence_experiment(la, lb, ladder, seed=args.seed)
    payload = {
        "suite": "convergence",
        "claim": "discretized loops agree up to rotation and recover the "
                 "circular offset in the limit",
        "config": {"eps_ladder": ladder, "seed": args.seed},
        "rows": [
            {
                "epsilon": r.epsilon,
                "equal": r.equal,
                "offset": r.offset,
                "sup_distance": r.sup_distance,
            }
            for r in report.rows
        ],
        "limiting_offset": report.limiting_offset,
        "final_sup_distance": report.final_sup_distance,
    }
    lines = [
        f"eps {_fmt(r.epsilon)} equal {r.equal} "
        + (f"offset {_fmt(r.offset)} sup {_fmt(r.sup_distance)}" if r.equal else "")
        for r in report.rows
    ]
    if report.limiting_offset is not None:
        lines.append(f"limiting_offset {_fmt(report.limiting_offset)}")
        lines.append(f"final_sup_distance {_fmt(report.final_sup_distance)}")
    findings = not all(r.equal for r in report.rows)
    figure = None
    if args.figure:
        from . import plots

        figure = plots.figure_convergence(report.rows)
    return payload, lines, findings, figure


_SUITES = {
    "injectivity": _suite_injectivity,
    "occupation": _suite_occupation,
    "probe": _suite_probe,
    "convergence": _suite_convergence,
}


def cmd_verify(args) -> int:
    if args.suite not in _SUITES:
        raise ValidationError(
            f"unknown suite {args.suite!r}; choose from {sorted(_SUITES)}"
        )
    payload, lines, findings, figure = _SUITES[args.suite](args)
    payload["findings"] = findings
    _emit(args, payload, lines + [f"findings {str(findings).lower()}"])
    if figure is not None and args.figure:
        from . import plots

        plots.save_figure(figure, args.figure)
    return 2 if findings else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopfield",
        description="loops, occupation fields, and loop metrics at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default="text"):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("text", "json"), default=fmt_default)
        p.add_argument("--out", default=None)
        p.add_argument("--figure", default=None)

    p = sub.add_parser("generate", help="draw a random loop")
    p.add_argument("--labels", default=None)
    p.add_argument("--dist", default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--based", action="store_true")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("occupation", help="evaluate an occupation pattern")
    p.add_argument("--loop", required=True)
    p.add_argument("--pattern", required=True)
    p.add_argument("--mc-samples", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_occupation)

    p = sub.add_parser("distance", help="based or quotient loop distance")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--quotient", action="store_true")
    p.add_argument("--refine", type=int, default=40)
    p.add_argument("--witness", default=None)
    common(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("discretize", help="partition, time change, induced loop")
    p.add_argument("--loop", required=True)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--max-n", type=int, default=3)
    p.add_argument("--report", default=None)
    common(p)
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("reconstruct", help="recover a loop from occupation values")
    p.add_argument("--loop", default=None)
    p.add_argument("--oracle", default=None)
    p.add_argument("--labels", default=None)
    p.add_argument("--qmax", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-6)
    common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("verify", help="run a property campaign")
    p.add_argument("--suite", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--labels", default=None)
    p.add_argument("--max-segments", type=int, default=6)
    p.add_argument("--nmax", type=int, default=6)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--mc-samples", type=int, default=200_000)
    p.add_argument("--a", default=None)
    p.add_argument("--b", default=None)
    p.add_argument("--eps-ladder", default=None)
    common(p, fmt_default="json")
    p.set_defaults(func=cmd_verify)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LoopfieldError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
