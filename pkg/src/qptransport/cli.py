"""Command-line front end.

Exit codes: 0 success, 2 a stated hypothesis failed on the data, 3 bad
configuration or unusable output directory, 4 a numerical invariant broke.

Keep this module import-light: --threads must pin the BLAS pool sizes via
environment variables before numpy is first imported, so the heavy modules
are only imported inside main() after the environment is set.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)

_COMMANDS = (
    "build",
    "evolve",
    "green-scan",
    "ldt",
    "theorem-check",
    "moment-scan",
    "phase-uniformity",
)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qptransport",
        description="quasiperiodic lattice transport laboratory",
    )
    p.add_argument("command", choices=_COMMANDS)
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default=None, help="directory for CSV reports")
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread cap")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return p


def _probe_out_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
    probe = os.path.join(path, ".write_probe")
    with open(probe, "w") as fh:
        fh.write("ok")
    os.remove(probe)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 3
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    # numpy/scipy come in only now, after the thread environment is fixed
    from .config import load_config
    from .errors import ConfigError, HypothesisUnmet, NumericalError
    from . import harness

    try:
        if args.out is not None:
            _probe_out_dir(args.out)
    except OSError as exc:
        print(f"error: output directory unusable: {exc}", file=sys.stderr)
        return 3

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        return _dispatch(args.command, cfg, args.out, harness)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except HypothesisUnmet as exc:
        print(f"hypothesis unmet: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


def _dispatch(command: str, cfg, out, harness) -> int:
    if command == "build":
        rep = harness.run_build(cfg, out)
        print(f"sites = {rep.n_sites}")
        print(f"norm_bound = {rep.norm_bound!r}")
        print(f"spectrum = [{rep.spectrum_lo!r}, {rep.spectrum_hi!r}]")
        print(f"velocity_bound = {rep.velocity_bound!r}")
    elif command == "evolve":
        rep = harness.run_evolve(cfg, out)
        for p, m in rep.moments.items():
            print(f"moment p={p}: final = {float(m[-1])!r}, tail_slope = {rep.slopes[p]!r}")
        print(f"edge_mass_max = {rep.edge_mass_max!r}")
    elif command == "green-scan":
        scan = harness.run_green_scan(cfg, out)
        print(f"delta_hat = {scan.delta_hat!r}")
        print(f"intersection_count = {scan.intersection_count}")
        print(f"refinement_flag = {scan.refinement_flag}")
        print(f"grid_too_coarse = {scan.grid_too_coarse}")
    elif command == "ldt":
        rep = harness.run_ldt(cfg, out)
        print(f"gamma_hat = {rep.gamma_hat!r} (spread {rep.gamma_spread!r})")
        lad = rep.ladder
        print(f"rho_hat = {lad.rho_hat!r}, rate_hat = {lad.rate_hat!r}, fit_points = {lad.n_fit}")
        if rep.bridge is not None:
            b = rep.bridge
            print(f"bridge: eps = {b.eps!r}, holds = {b.holds}, degenerate = {b.degenerate}")
    elif command == "theorem-check":
        rep = harness.run_theorem_check(cfg, out)
        print(f"delta_hat = {rep.delta_hat!r} (delta = {rep.delta!r})")
        print(f"hypothesis_met = {rep.hypothesis_met}")
        if not rep.hypothesis_met:
            print("hypothesis unmet: no conclusion asserted", file=sys.stderr)
            return 2
        print(f"horizon_cap = {rep.horizon_cap!r}, c_hat = {rep.c_hat!r}")
        for b in rep.boxes:
            print(
                f"box hw={b.halfwidth}: C_raw = {b.C_raw!r}, C_fit = {b.C_fit!r}, "
                f"violations = {b.violations}, tail_prob = {b.max_prob_tail!r}"
            )
        print(f"C_ratio = {rep.C_ratio!r}")
        if rep.sweep_scale is not None:
            print(f"family sweep N={rep.sweep_scale}: delta_hat = {rep.sweep_delta_hat!r}")
        print(f"contour_gap = {rep.contour_gap!r}")
    elif command == "moment-scan":
        rep = harness.run_moment_scan(cfg, out)
        for p, s in rep.slopes.items():
            print(
                f"moment p={p}: tail_slope = {s!r}, "
                f"loglog_slope = {rep.loglog_slopes[p]!r}"
            )
            if p in rep.envelope_exponents:
                print(f"  envelope exponent p/rho = {rep.envelope_exponents[p]!r}")
        print(f"edge_mass_max = {rep.edge_mass_max!r}")
        if not (rep.doubling_delta != rep.doubling_delta):  # nan check without numpy
            print(f"phase-sup doubling delta = {rep.doubling_delta!r}")
    elif command == "phase-uniformity":
        rep = harness.run_phase_uniformity(cfg, out)
        print(f"mean_delta_hat = {rep.mean_delta_hat!r}")
        print(
            f"typical_fraction = {rep.typical_fraction!r}, "
            f"atypical_fraction = {rep.atypical_fraction!r} "
            f"(chebyshev prediction {rep.chebyshev_prediction!r})"
        )
        if rep.inconclusive:
            print("inconclusive: no typical phase in the sample", file=sys.stderr)
            return 2
        if rep.atypical_fraction > 0.0:
            print(
                f"gap = {rep.gap!r} vs surrogate {rep.gap_surrogate!r} "
                f"at distance {rep.pair_distance!r}: ok = {rep.gap_ok}"
            )
        else:
            print("every sampled phase is typical; no gap pair to evolve")
    else:  # pragma: no cover - argparse restricts choices
        raise AssertionError(command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
