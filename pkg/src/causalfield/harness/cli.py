"""Command-line front end: batch verification campaigns and reports."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import CausalFieldError, ConfigError


def _add_common(p):
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="campaign seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="causalfield",
        description="lattice verification campaigns for perturbed wave "
                    "dynamics, scattering phases and their trivialization")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a campaign config")
    p.add_argument("--config", required=True)
    _add_common(p)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--strict-vacuous", action="store_true",
                   help="count vacuous scenarios as failures")

    p = sub.add_parser("cones", help="render the cones of a perturbation file")
    p.add_argument("--pert", required=True, help="perturbation container")
    _add_common(p)

    p = sub.add_parser("implementer",
                       help="build and report one Fock implementer")
    p.add_argument("--pert", required=True, help="perturbation container "
                   "(1+1D periodic window)")
    p.add_argument("--cutoff", type=int, default=4)
    p.add_argument("--n-ref", type=int, default=4)
    _add_common(p)

    p = sub.add_parser("cocycle", help="run a cocycle session file")
    p.add_argument("--session", required=True)
    _add_common(p)

    p = sub.add_parser("plot", help="re-render a figure from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--kind", required=True,
                   choices=["convergence", "cones", "phases"])
    p.add_argument("--scenario", default=None)
    p.add_argument("--out", default="plot.svg")
    return ap


def cmd_verify(args) -> int:
    from .campaign import run_campaign
    report = run_campaign(args.config, out_dir=args.out, seed=args.seed,
                          threads=args.threads,
                          strict_vacuous=args.strict_vacuous)
    for sc in report["scenarios"]:
        print(f"{sc['status']:8s} {sc['name']}"
              + (f"  ({sc['message']})" if sc["message"] else ""))
    s = report["summary"]
    print(f"pass={s['pass']} fail={s['fail']} vacuous={s['vacuous']} "
          f"error={s['error']}")
    return 0 if s["failed"] == 0 else 1


def cmd_cones(args) -> int:
    import csv

    import numpy as np

    from .. import io as cfio
    from ..geometry import (Region, causal_cone, check_admissible,
                            speed_field)
    from .campaign import _band_extents
    from .plots import emit_plot

    pert = cfio.read_perturbation(args.pert)
    rep = check_admissible(pert)
    if not rep.passed:
        print("perturbation is not admissible", file=sys.stderr)
        return 1
    support = Region.of_support(pert)
    over = causal_cone(support, speed_field(pert), "future", "over")
    under = causal_cone(support, speed_field(pert), "future", "under")
    flat = causal_cone(support, rep.c, "future", "over")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bands = {"over": _band_extents(flat.mask),
             "under": _band_extents(under.mask),
             "support": _band_extents(over.mask)}
    report = {"scenarios": [{"name": "cones", "series": {"cones": bands},
                             "metrics": {}, "status": "pass", "message": ""}]}
    emit_plot(report, "cones", out / "cones.svg")
    with open(out / "cones.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "kind", "lo", "hi"])
        for kind, rows in bands.items():
            for n, ext in enumerate(rows):
                if ext is not None:
                    w.writerow([n, kind, ext[0], ext[1]])
    print(f"epsilon class {rep.epsilon:.4f}, dominating speed {rep.c:.4f}")
    print(f"wrote {out / 'cones.svg'} and {out / 'cones.csv'}")
    return 0


def cmd_implementer(args) -> int:
    from .. import io as cfio
    from ..weyl import FockBasis, OneParticleSpace, build_implementer

    pert = cfio.read_perturbation(args.pert)
    lat = pert.lattice
    space = OneParticleSpace(lat, n_ref=args.n_ref)
    basis = FockBasis(lat.shape[1], args.cutoff)
    impl = build_implementer(space, pert, basis)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    diag = dict(impl.diagnostics)
    diag.update({"modes": basis.M, "cutoff": basis.n_max,
                 "phase_re": impl.phase.real, "phase_im": impl.phase.imag})
    with open(out / "implementer.json", "w", encoding="utf-8") as fh:
        json.dump(diag, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(json.dumps(diag, sort_keys=True))
    return 0


def cmd_cocycle(args) -> int:
    from fractions import Fraction

    from .. import io as cfio
    from ..cocycle import (CellUniverse, Coboundary, PhaseOracle, RegionPair,
                           extend_phase, trivialize)

    cfg = cfio.load_json(args.session)
    uni = cfg.get("universe", {})
    u = CellUniverse(uni.get("n_t", 8), uni.get("n_x", 8),
                     uni.get("components", 4),
                     Fraction(uni.get("bound", "1/2")),
                     uni.get("speed", 2))
    src = cfg.get("oracle", {"type": "synthetic", "seed": 0})
    if src.get("type") != "synthetic":
        raise ConfigError("only synthetic oracle sessions are supported "
                          "from the command line; measured runs go through "
                          "the campaign runner")
    beta = Coboundary.random_rational(int(src.get("seed", 0)))
    ext = extend_phase(PhaseOracle.from_coboundary(beta, u))
    pairs = [RegionPair(frozenset(map(tuple, p["first"])),
                        frozenset(map(tuple, p["second"])))
             for p in cfg["region_pairs"]]
    result = trivialize(ext, pairs,
                        samples_per_pair=cfg.get("samples_per_pair", 5),
                        seed=cfg.get("seed", 5))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = {}
    for step in result._engine.steps:
        for key, phase in step.table.items():
            table[repr(key)] = float(phase.turns)
    payload = {"report": result.report, "beta_turns": table}
    with open(out / "cocycle.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print("residual defects:", result.report["residual_defects"])
    return 0


def cmd_plot(args) -> int:
    from .. import io as cfio
    from .plots import emit_plot

    report = cfio.load_json(args.report)
    emit_plot(report, args.kind, args.out, scenario=args.scenario)
    print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "cones": cmd_cones,
    "implementer": cmd_implementer,
    "cocycle": cmd_cocycle,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CausalFieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
