"""Command-line front end: each command writes one figure's data as CSV.

Usage::

    encoded-registers <command> [--config FILE] [--out FILE] [--seed N]
                      [--samples N] [--param key=value ...]

Lengths are in units of the spin spacing a (or of r0, 1/T where a command
says so).  A config file holds ``key = value`` lines; ``#`` starts a
comment.  ``--param`` overrides the file, and ``--seed``/``--samples``
override both.  Exit status: 0 on success, 1 on a numerical failure,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
from importlib import metadata

import numpy as np
from scipy.linalg import toeplitz

from .encoding import crossover_estimate, crossover_time, effective_k_table, plateau
from .fidelity import (
    McConfig,
    fidelity_encoded_asymptote,
    fidelity_exact_sum,
    fidelity_independent,
    fidelity_mc,
    fidelity_symmetric,
    fidelity_weak_coupling,
)
from .kernel import BathSpec, ConvergenceError, k_dispatch, k_zero_exact
from .redfield import (
    PSI_SYMMETRIC,
    IntegrationError,
    PositivityError,
    SpinPairSpec,
    TwoSpinState,
    asymptotic_rate,
    evolve,
    rate_from_trajectory,
    state_fidelity,
    subspace_fidelity,
)

__all__ = ["ConfigError", "main", "COMMANDS"]


class ConfigError(ValueError):
    """Invalid command line or configuration."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return "%.12g" % x


# ---------------------------------------------------------------------------
# configuration


def _parse_value(key, raw, default):
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse {key}={raw!r}") from None
    return raw


def _read_config(path) -> dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def resolve_config(defaults: dict, file_values: dict, overrides: dict) -> dict:
    cfg = dict(defaults)
    for source in (file_values, overrides):
        for key, raw in source.items():
            if key not in defaults:
                raise ConfigError(f"unknown parameter {key!r}; valid: {', '.join(sorted(defaults))}")
            cfg[key] = _parse_value(key, raw, defaults[key]) if isinstance(raw, str) else raw
    _validate(cfg)
    return cfg


def _validate(cfg):
    for key, val in cfg.items():
        if key in ("seed", "check", "numeric"):
            continue
        vals = val if isinstance(val, tuple) else (val,)
        for v in vals:
            if isinstance(v, (int, float)) and not isinstance(v, bool) and not v > 0 and not key.endswith("_min"):
                raise ConfigError(f"{key} must be positive, got {v}")
    for lo, hi in (("tau_min", "tau_max"), ("theta_min", "theta_max"), ("kappa_min", "kappa_max"),
                   ("p_min", "p_max")):
        if lo in cfg and hi in cfg and not cfg[lo] < cfg[hi]:
            raise ConfigError(f"{lo} must be below {hi}")
        if lo in cfg and cfg[lo] < 0:
            raise ConfigError(f"{lo} must be non-negative")
    if "points" in cfg and cfg["points"] < 2:
        raise ConfigError("points must be >= 2")


# ---------------------------------------------------------------------------
# output


class Table:
    def __init__(self, command: str, cfg: dict, columns):
        self.buf = io.StringIO()
        self.buf.write(f"# encoded-registers {_version()}\n# command = {command}\n")
        for key in sorted(cfg):
            val = cfg[key]
            text = ",".join(_fmt(v) for v in val) if isinstance(val, tuple) else _fmt(val)
            self.buf.write(f"# {key} = {text}\n")
        self.buf.write(",".join(columns) + "\n")

    def row(self, *values):
        self.buf.write(",".join(_fmt(v) for v in values) + "\n")

    def note(self, text: str):
        self.buf.write(f"# {text}\n")

    def getvalue(self) -> str:
        return self.buf.getvalue()


def _grid(lo, hi, points, log):
    if log:
        if lo <= 0:
            raise ConfigError("a logarithmic grid needs a positive lower bound")
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


# ---------------------------------------------------------------------------
# commands


def cmd_fig_decoherence(cfg) -> str:
    """K(0,t) and K(r0,t) versus tau = t/r0 with short/long-time approximations."""
    temp, alpha = cfg["T_r0"], cfg["alpha"]
    bath = BathSpec(alpha, cfg["omega_over_T"] * temp, temp)
    taus = _grid(cfg["tau_min"], cfg["tau_max"], cfg["points"], False)
    k0 = k_zero_exact(taus, bath)
    kr = k_dispatch(1.0, taus, bath)
    short = 0.5 * alpha * np.log1p((taus * bath.omega_c) ** 2)
    long = alpha * np.pi * temp * taus + alpha * math.log(bath.omega_c / (2 * np.pi * temp))
    out = Table("fig-decoherence", cfg, ["tau", "K_0", "K_r0", "K_0_short", "K_0_long"])
    for row in zip(taus, k0, kr, short, long):
        out.row(*row)
    return out.getvalue()


def cmd_fig_knull(cfg) -> str:
    """K(0,t) and K^1_0(t) at a high and a low temperature."""
    taus = _grid(cfg["tau_min"], cfg["tau_max"], cfg["points"], True)
    out = Table("fig-knull", cfg, ["Ta", "tau", "K_0", "K1_0"])
    for ta in (cfg["Ta_high"], cfg["Ta_low"]):
        bath = BathSpec(cfg["alpha"], cfg["omega_a"], ta)
        tc = crossover_time(1.0, bath)
        out.note(f"crossover Ta={_fmt(ta)}: tau_c = {_fmt(tc)} (estimate {_fmt(crossover_estimate(1.0, bath))})")
        k0 = k_zero_exact(taus, bath)
        k1 = effective_k_table(1, 1, taus, 1.0, bath)[0]
        for row in zip(taus, k0, k1):
            out.row(ta, *row)
    return out.getvalue()


def cmd_fig_knull_T(cfg) -> str:
    """Long-time plateaus K^chi_0(inf), chi = 1, 2, 3, versus Theta = Ta."""
    thetas = _grid(cfg["theta_min"], cfg["theta_max"], cfg["points"], True)
    out = Table("fig-knull-T", cfg, ["theta", "K1_inf", "K2_inf", "K3_inf"])
    for th in thetas:
        bath = BathSpec(cfg["alpha"], cfg["omega_a"], th)
        out.row(th, *(plateau(chi, 1.0, bath) for chi in (1, 2, 3)))
    return out.getvalue()


def cmd_fig_fidelity_examples(cfg) -> str:
    """Independent and uniformly coupled registers versus kappa."""
    n = cfg["n"]
    kappas = _grid(cfg["kappa_min"], cfg["kappa_max"], cfg["points"], True)
    out = Table("fig-fidelity-examples", cfg,
                ["kappa", "F_indep_exact", "F_indep_wc", "ratio", "F_symmetric", "F_symmetric_large_n"])
    for kappa in kappas:
        exact = fidelity_independent(n, kappa).value
        wc = fidelity_weak_coupling(kappa * np.eye(n)).value
        sym = fidelity_symmetric(n, kappa)
        out.row(kappa, exact, wc, wc / exact, sym.value, sym.extras["large_n"])
    return out.getvalue()


def _linear_k(n, gamma_t, tau):
    # high-temperature kernel with K(0) = gamma t, in units of a
    d = np.arange(n, dtype=float)
    safe = np.where(d > 0, d, 1.0)
    return np.where(d < tau, gamma_t * (1 - d / (2 * tau)), gamma_t * tau / (2 * safe))


def cmd_fig_foft(cfg) -> str:
    """Plain register with correlated dephasing against the two bracketing cases."""
    n, g = cfg["n"], cfg["gamma_a"]
    taus = _grid(cfg["tau_min"], cfg["tau_max"], cfg["points"], True)
    out = Table("fig-foft", cfg, ["tau", "F_0", "F_i", "F_s"])
    for tau in taus:
        f0 = fidelity_weak_coupling(toeplitz(_linear_k(n, g * tau, tau))).value
        out.row(tau, f0, fidelity_independent(n, g * tau).value, fidelity_symmetric(n, g * tau).value)
    if cfg["check"]:
        m, tau = cfg["check_n"], cfg["check_tau"]
        k = toeplitz(_linear_k(m, g * tau, tau))
        mc = fidelity_mc(k, McConfig(cfg["samples"], cfg["seed"]))
        out.note(f"check n={m} tau={_fmt(tau)}: exact = {_fmt(fidelity_exact_sum(k).value)}, "
                 f"mc = {_fmt(mc.value)} +- {_fmt(mc.std_error)}, "
                 f"weak coupling = {_fmt(fidelity_weak_coupling(k).value)}")
    return out.getvalue()


def cmd_fig_temperature(cfg) -> str:
    """Plain (chi=0) and encoded (chi=1) register fidelity at several temperatures."""
    n = cfg["n"]
    taus = _grid(cfg["tau_min"], cfg["tau_max"], cfg["points"], True)
    out = Table("fig-temperature", cfg, ["Ta", "tau", "F_0", "F_1"])
    for ta in cfg["Ta"]:
        bath = BathSpec(cfg["alpha"], cfg["omega_a"], ta)
        cols = []
        for chi in (0, 1):
            tab = effective_k_table(chi, n, taus, 1.0, bath)
            cols.append([fidelity_weak_coupling(toeplitz(tab[:, i])).value for i in range(taus.size)])
        k1 = plateau(1, 1.0, bath)
        out.note(f"Ta={_fmt(ta)}: K1_0(inf) = {_fmt(k1)}, independent-qubit plateau F_1 = "
                 f"{_fmt(fidelity_encoded_asymptote(n, k1).value)}")
        for row in zip(taus, *cols):
            out.row(ta, *row)
    return out.getvalue()


def _pair_spec(cfg, aT):
    temp = 1.0
    bath = BathSpec(cfg["alpha"], cfg["omega_over_T"] * temp, temp)
    return SpinPairSpec(cfg["eps_over_T"] * temp, aT / temp, bath)


def _fit_rate(spec, cfg, numeric=False):
    a = spec.a
    ts = np.linspace(0, 20 * a, 201)
    f = subspace_fidelity(evolve(TwoSpinState.antisymmetric(), ts, spec, numeric_correlators=numeric))
    return rate_from_trajectory(ts, f, t_min=5 * a, t_max=20 * a)


def cmd_fig_dissipative(cfg) -> str:
    """Subspace fidelity of the antisymmetric pair state under dissipative coupling."""
    taus = _grid(0.0, cfg["tau_max"], cfg["points"], False)
    distances = cfg["aT"]
    cols, notes = [], []
    for aT in distances:
        spec = _pair_spec(cfg, aT)
        cols.append(subspace_fidelity(evolve(TwoSpinState.antisymmetric(), taus, spec,
                                             numeric_correlators=cfg["numeric"])))
        fit = _fit_rate(spec, cfg, cfg["numeric"])
        notes.append(f"aT={_fmt(aT)}: fitted rate = {_fmt(fit.rate)}, gamma1 = {_fmt(asymptotic_rate(spec)[1])}")
    sym_spec = _pair_spec(cfg, cfg["aT_symmetric"])
    cols.append(state_fidelity(evolve(TwoSpinState.symmetric(), taus, sym_spec,
                                      numeric_correlators=cfg["numeric"]), PSI_SYMMETRIC))
    names = [f"F_aT={_fmt(aT)}" for aT in distances] + [f"F_symmetric_aT={_fmt(cfg['aT_symmetric'])}"]
    out = Table("fig-dissipative", cfg, ["tau", *names])
    for note in notes:
        out.note(note)
    for row in zip(taus, *cols):
        out.row(*row)
    return out.getvalue()


def cmd_fig_reduction(cfg) -> str:
    """gamma1/gamma0 = 2(1 - sin p / p) versus p = eps a."""
    ps = _grid(cfg["p_min"], cfg["p_max"], cfg["points"], False)
    out = Table("fig-reduction", cfg, ["p", "gamma1_over_gamma0"])
    if cfg["check"]:
        for aT in cfg["check_aT"]:
            spec = _pair_spec(cfg, aT)
            g0, g1 = asymptotic_rate(spec)
            fit = _fit_rate(spec, cfg)
            out.note(f"p={_fmt(spec.p)}: ODE slope ratio = {_fmt(fit.rate / g0)}, formula = {_fmt(g1 / g0)}")
    for p in ps:
        out.row(p, 0.0 if p == 0 else 2 * (1 - math.sin(p) / p))
    return out.getvalue()


def cmd_headline(cfg) -> str:
    """Asymptotic encoded-register fidelity and storage-rate requirements."""
    n, ga = cfg["n"], cfg["gamma_a"]
    f = fidelity_encoded_asymptote(n, ga).value
    prec, q, t0 = cfg["precision"], cfg["q"], cfg["t0_over_a"]
    g0 = 2 * prec * n ** -(1 + q) / t0
    g1 = 2 * prec / n
    lines = [
        f"# encoded-registers {_version()}",
        "# command = headline",
        *(f"# {k} = {_fmt(cfg[k])}" for k in sorted(cfg)),
        f"F1_inf = {_fmt(f)}",
        f"one_minus_F1_inf = {_fmt(1 - f)}",
        f"gamma0_required_times_a = {_fmt(g0)}",
        f"gamma1_required_times_a = {_fmt(g1)}",
        f"gamma1_over_gamma0 = {_fmt(g1 / g0)}",
    ]
    return "\n".join(lines) + "\n"


_TAU = dict(tau_min=0.0, tau_max=20.0, points=201)
COMMANDS = {
    "fig-decoherence": (cmd_fig_decoherence, dict(T_r0=5.0, omega_over_T=1e3, alpha=1.0, **_TAU)),
    "fig-knull": (cmd_fig_knull, dict(Ta_high=10.0, Ta_low=0.1, omega_a=1e3, alpha=1e-3,
                                      tau_min=1e-2, tau_max=1e2, points=121)),
    "fig-knull-T": (cmd_fig_knull_T, dict(omega_a=5e3, alpha=1e-3, theta_min=1e-2, theta_max=1e2, points=41)),
    "fig-fidelity-examples": (cmd_fig_fidelity_examples, dict(n=100, kappa_min=1e-4, kappa_max=1.0, points=41)),
    "fig-foft": (cmd_fig_foft, dict(n=125, gamma_a=1e-4, tau_min=1.0, tau_max=1e3, points=61, check=True,
                                    check_n=12, check_tau=130.0, samples=200_000, seed=0)),
    "fig-temperature": (cmd_fig_temperature, dict(n=125, Ta=(10.0, 0.2, 0.1, 0.05), omega_a=1e3, alpha=1e-3,
                                                  tau_min=0.1, tau_max=1e4, points=51)),
    "fig-dissipative": (cmd_fig_dissipative, dict(eps_over_T=5.0, alpha=0.01, omega_over_T=1e3,
                                                  aT=(0.1, 0.2, 0.3), aT_symmetric=0.2, tau_max=6.0,
                                                  points=121, numeric=False)),
    "fig-reduction": (cmd_fig_reduction, dict(p_min=0.0, p_max=20.0, points=201, check=True,
                                              check_aT=(0.1, 0.2, 0.3), eps_over_T=5.0, alpha=0.01,
                                              omega_over_T=1e3)),
    "headline": (cmd_headline, dict(n=125, gamma_a=1e-4, precision=1e-2, q=1.0, t0_over_a=1.0)),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="encoded-registers", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="file of key = value lines")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        func, defaults = COMMANDS[args.command]
        file_values = _read_config(args.config) if args.config else {}
        overrides = {}
        for item in args.param:
            if "=" not in item:
                raise ConfigError(f"--param expects key=value, got {item!r}")
            key, val = item.split("=", 1)
            overrides[key.strip()] = val.strip()
        for key in ("seed", "samples"):
            val = getattr(args, key)
            if val is not None:
                if key not in defaults:
                    raise ConfigError(f"--{key} does not apply to {args.command}")
                overrides[key] = str(val)
        cfg = resolve_config(defaults, file_values, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        text = func(cfg)
    except (ConvergenceError, IntegrationError, PositivityError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
