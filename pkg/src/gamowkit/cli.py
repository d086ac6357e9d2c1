"""Command-line interface.

Subcommands: ``convert``, ``synth``, ``fit``, ``evolve``, ``survival``.
Energies are in GeV; ``--t-max`` of ``evolve`` and ``survival`` is in units
of 1/Gamma, and the ``t`` column of their output is ``Gamma t``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io as gio
from .config import RunConfig, load_config
from .errors import NumericalError, ValidationError
from .jordan import JordanBlock, evolve_operator, w_n, w_pt
from .lineshape import FitOptions, LineshapeModel, ModelKind, fit, synthesize
from .pole_param import (
    Convention,
    NonRelResonance,
    ResonanceParams,
    convert,
    lifetime_from_width,
    pole_from_params,
)
from .survival import TruncatedBWState, deviation_curve

OUTPUT_DIR_ENV = "GAMOWKIT_OUTPUT_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

log = logging.getLogger("gamowkit")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = _Parser(prog="gamowkit", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="TOML run configuration; flags override its values")
    p.add_argument("--output-dir", default=S, help=f"directory for relative output paths (env {OUTPUT_DIR_ENV})")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("convert", help="convert (M, Gamma) between pole conventions")
    c.add_argument("--from", dest="from_convention", default=S, choices=[v.value for v in Convention])
    c.add_argument("--m", type=float, default=S)
    c.add_argument("--gamma", type=float, default=S)
    c.add_argument("--to", dest="to_convention", default=S, choices=[v.value for v in Convention])

    s = sub.add_parser("synth", help="synthesize a noisy lineshape dataset")
    s.add_argument("--kind", default=S, choices=[v.value for v in ModelKind])
    s.add_argument("--convention", default=S)
    s.add_argument("--m", type=float, default=S, help="M or E_R, GeV")
    s.add_argument("--gamma", type=float, default=S)
    s.add_argument("--residue", type=float, default=S)
    s.add_argument("--residue-im", type=float, default=S)
    s.add_argument("--background", type=_floats, default=S, help="comma-separated coefficients")
    s.add_argument("--x-min", type=float, default=S)
    s.add_argument("--x-max", type=float, default=S)
    s.add_argument("--points", type=int, default=S)
    s.add_argument("--noise", type=float, default=S, help="relative Gaussian noise")
    s.add_argument("--seed", type=int, default=S)
    s.add_argument("--out", default=S)

    f = sub.add_parser("fit", help="fit a lineshape model to a dataset")
    f.add_argument("--data", default=S)
    f.add_argument("--kind", default=S, choices=[v.value for v in ModelKind])
    f.add_argument("--convention", default=S)
    f.add_argument("--m", type=float, default=S, help="starting M or E_R")
    f.add_argument("--gamma", type=float, default=S, help="starting width")
    f.add_argument("--residue", type=float, default=S, help="starting |residue|")
    f.add_argument("--background", type=_floats, default=S)
    f.add_argument("--max-iter", type=int, default=S)
    f.add_argument("--out", default=S, help="fit report (TOML)")

    e = sub.add_parser("evolve", help="decay curves of W^(n) and W_PT for an N-th order pole")
    e.add_argument("--z-real", type=float, default=S)
    e.add_argument("--gamma", type=float, default=S)
    e.add_argument("--order", type=int, default=S)
    e.add_argument("--t-max", type=float, default=S, help="in units of 1/Gamma")
    e.add_argument("--steps", type=int, default=S)
    e.add_argument("--out", default=S)

    v = sub.add_parser("survival", help="non-exponential deviation of a truncated Breit-Wigner state")
    v.add_argument("--er-over-gamma", type=float, default=S)
    v.add_argument("--gamma", type=float, default=S)
    v.add_argument("--t-max", type=float, default=S, help="in units of 1/Gamma")
    v.add_argument("--steps", type=int, default=S)
    v.add_argument("--out", default=S)
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    opts = vars(args)
    if args.command:
        cfg.command = args.command
    for key in ("seed", "output_dir"):
        if key in opts:
            setattr(cfg, key, opts[key])
    if cfg.command is None:
        raise ValidationError("no subcommand given (on the command line or in the config)")
    spec = cfg.section(cfg.command)
    names = {f.name for f in dataclasses.fields(spec)}
    updates = {k: v for k, v in opts.items() if k in names}
    setattr(cfg, cfg.command, dataclasses.replace(spec, **updates))
    return cfg


def _out_path(cfg: RunConfig, name) -> Path:
    path = Path(name)
    base = cfg.output_dir or os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _require(spec, *names):
    missing = [n for n in names if getattr(spec, n) is None]
    if missing:
        raise ValidationError("missing required value(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _resonance(kind: ModelKind, convention, m, gamma):
    if kind is ModelKind.NONREL_BW:
        return NonRelResonance(m, gamma)
    if kind is ModelKind.ONSHELL_BW:
        convention = Convention.ON_SHELL
    return ResonanceParams(convention, m, gamma)


def cmd_convert(cfg: RunConfig, out) -> int:
    spec = cfg.convert
    _require(spec, "m", "gamma")
    src = ResonanceParams(spec.from_convention, spec.m, spec.gamma)
    dst = convert(src, spec.to_convention)
    s_r = pole_from_params(src).s_r
    print(f"{dst.convention.value}: M = {dst.M:.6f} GeV, Gamma = {dst.Gamma:.6f} GeV", file=out)
    print(f"s_R = {s_r.real:.6f} {s_r.imag:+.6f}i GeV^2", file=out)
    if dst.Gamma > 0.0:
        print(f"tau = hbar/Gamma = {lifetime_from_width(dst.Gamma):.6e} s", file=out)
    return EXIT_OK


def cmd_synth(cfg: RunConfig, out) -> int:
    spec = cfg.synth
    kind = ModelKind.parse(spec.kind)
    if spec.points < 1 or not spec.x_max > spec.x_min:
        raise ValidationError("need points >= 1 and x_max > x_min")
    model = LineshapeModel(
        kind,
        _resonance(kind, spec.convention, spec.m, spec.gamma),
        residue=complex(spec.residue, spec.residue_im),
        background=spec.background,
    )
    grid = np.linspace(spec.x_min, spec.x_max, spec.points)
    data = synthesize(model, grid, spec.noise, cfg.seed)
    path = _out_path(cfg, spec.out)
    gio.save_dataset(data, path)
    print(f"wrote {len(data)} points to {path}", file=out)
    return EXIT_OK


def cmd_fit(cfg: RunConfig, out) -> int:
    spec = cfg.fit
    _require(spec, "data")
    data = gio.load_dataset(spec.data)
    if len(data) == 0:
        raise ValidationError(f"{spec.data}: dataset is empty")
    kind = ModelKind.parse(spec.kind)
    m = spec.m
    if m is None:
        m = float(data.x[int(np.argmax(data.sigma))])
    gamma = spec.gamma
    if gamma is None:
        half = data.sigma >= 0.5 * data.sigma.max()
        gamma = float(data.x[half].max() - data.x[half].min()) or float(np.ptp(data.x)) / 10.0
    residue = spec.residue
    if residue is None:
        # peak of |r / (s - s_R)|^2 is |r|^2 / (M Gamma)^2 (or Gamma^2/4 non-relativistically)
        scale = m * gamma if kind is not ModelKind.NONREL_BW else 0.5 * gamma
        residue = math.sqrt(float(data.sigma.max())) * scale or 1.0
    init = LineshapeModel(kind, _resonance(kind, spec.convention, m, gamma), residue=residue, background=spec.background)
    result = fit(data, kind, init, FitOptions(max_iter=spec.max_iter))
    conv = "nonrel" if kind is ModelKind.NONREL_BW else result.model.resonance.convention.value
    print(f"{kind.value} ({conv}): M = {result.model.mass:.6f} +- {result.errors[0]:.6f} GeV, "
          f"Gamma = {result.model.width:.6f} +- {result.errors[1]:.6f} GeV", file=out)
    print(f"chi2/dof = {result.chi2:.4f}/{result.dof} = {result.chi2_per_dof:.4f}, "
          f"converged = {result.converged} ({result.iterations} iterations)", file=out)
    if spec.out:
        path = _out_path(cfg, spec.out)
        gio.save_fit_report(result, path)
        print(f"wrote report to {path}", file=out)
    if not result.converged:
        log.error("fit did not converge: %s", result.message)
        return EXIT_NUMERICAL
    return EXIT_OK


def evolve_rows(block: JordanBlock, gamma_t):
    """Rows ``(Gamma t, exp(-Gamma t), |W^(0)(t)|/|W^(0)|, ..., |W_PT(t)|/|W_PT|)``."""
    ops = [w_n(block, n) for n in range(block.N)] + [w_pt(block)]
    norms0 = [np.linalg.norm(W.matrix) for W in ops]
    rows = []
    for gt in gamma_t:
        t = gt / block.Gamma
        row = [gt, math.exp(-gt)]
        for W, n0 in zip(ops, norms0):
            row.append(np.linalg.norm(evolve_operator(W, t).matrix) / n0)
        rows.append(row)
    columns = ["t", "exponential"] + [f"w{n}_norm" for n in range(block.N)] + ["wpt_norm"]
    return columns, rows


def cmd_evolve(cfg: RunConfig, out) -> int:
    spec = cfg.evolve
    if spec.steps < 1 or spec.t_max < 0.0:
        raise ValidationError("need steps >= 1 and t_max >= 0")
    block = JordanBlock.from_energy_width(spec.z_real, spec.gamma, spec.order)
    columns, rows = evolve_rows(block, np.linspace(0.0, spec.t_max, spec.steps + 1))
    path = _out_path(cfg, spec.out)
    gio.save_curve(rows, path, columns)
    print(f"wrote {len(rows)} rows to {path}", file=out)
    return EXIT_OK


def cmd_survival(cfg: RunConfig, out) -> int:
    spec = cfg.survival
    if spec.steps < 1 or spec.t_max < 0.0:
        raise ValidationError("need steps >= 1 and t_max >= 0")
    state = TruncatedBWState.from_ratio(spec.er_over_gamma, spec.gamma)
    gamma_t = np.linspace(0.0, spec.t_max, spec.steps + 1)
    rows = deviation_curve(state, gamma_t / state.Gamma)
    rows = [(gt, p, e, r) for gt, (_, p, e, r) in zip(gamma_t, rows)]
    path = _out_path(cfg, spec.out)
    gio.save_curve(rows, path)
    print(f"wrote {len(rows)} rows to {path}", file=out)
    return EXIT_OK


COMMANDS = {
    "convert": cmd_convert,
    "synth": cmd_synth,
    "fit": cmd_fit,
    "evolve": cmd_evolve,
    "survival": cmd_survival,
}


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_VALIDATION
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
