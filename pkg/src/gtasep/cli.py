"""Command-line interface: ``gtasep {exact,verify,simulate,oracle}``.

Every table is written as CSV preceded by ``#`` comment lines that echo the
tool version and the full parsed run specification.

Exit codes: 0 success, 2 usage error, 3 verification failure, 4 size cap.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from math import comb
from typing import Callable, Iterable

from . import __version__, exact, mpa, oracle, simulator
from .core import DomainError, GtasepError, ModelParams, RepresentationError, to_scalar

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_CAP = 0, 2, 3, 4

FIGURES = {
    "F249": (24, 9, ("->1", "0", "-10")),
    "F2412": (24, 12, ("->1", "1/2", "0")),
}


class UsageError(GtasepError):
    pass


@dataclass(frozen=True)
class RunSpec:
    """Parsed command line; :meth:`to_argv` reproduces an equivalent invocation."""

    command: str
    L: int | None = None
    N: int | None = None
    p: str | None = None
    pt: str | None = None
    x: str | None = None
    nu: str | None = None
    mode: str | None = None
    out: str | None = None
    r_range: str | None = None
    Z: bool = False
    current: bool = False
    corr: bool = False
    nn: bool = False
    figure: str | None = None
    aggregation_limit: bool = False
    sweeps: int = 100_000
    burn_in: int | None = None
    seed: int = 0
    replicas: int = 1
    dynamics: str = "chip"
    initial: str = "uniform-random"
    compare: bool = False
    max_L: int = 12
    tamper: bool = False
    identities_only: bool = False

    _FLAGS = {
        "L": "-L", "N": "-N", "p": "-p", "pt": "--pt", "x": "--x", "nu": "--nu",
        "mode": "--mode", "out": "--out", "r_range": "--r-range", "Z": "--Z",
        "current": "--current", "corr": "--corr", "nn": "--nn", "figure": "--figure",
        "aggregation_limit": "--aggregation-limit", "sweeps": "--sweeps",
        "burn_in": "--burn-in", "seed": "--seed", "replicas": "--replicas",
        "dynamics": "--dynamics", "initial": "--initial", "compare": "--compare",
        "max_L": "--max-L", "tamper": "--tamper", "identities_only": "--identities-only",
    }

    def to_argv(self) -> list[str]:
        argv = [self.command]
        defaults = RunSpec(self.command)
        for f in fields(self):
            if f.name == "command":
                continue
            value = getattr(self, f.name)
            if value == getattr(defaults, f.name):
                continue
            if isinstance(value, bool):
                argv.append(self._FLAGS[f.name])
            elif str(value).startswith("-"):
                argv.append(f"{self._FLAGS[f.name]}={value}")
            else:
                argv += [self._FLAGS[f.name], str(value)]
        return argv

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunSpec":
        return cls(**json.loads(text))


def _add_model_args(sp: argparse.ArgumentParser, sizes: bool = True) -> None:
    if sizes:
        sp.add_argument("-L", type=int)
        sp.add_argument("-N", type=int)
    sp.add_argument("-p", help="front hopping probability, 'a/b' or decimal")
    sp.add_argument("-pt", "--pt", dest="pt", help="follow-up hopping probability")
    sp.add_argument("--x", help="x = (1 - pt)/(1 - p)")
    sp.add_argument("--nu", help="nu = 1 - x")
    sp.add_argument("--mode", choices=("exact", "float"))
    sp.add_argument("--out", help="write the table to this path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gtasep", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"gtasep {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("exact", help="closed-form partition function, current, correlations")
    _add_model_args(ex)
    ex.add_argument("--Z", action="store_true", help="partition-function coefficients in x")
    ex.add_argument("--current", action="store_true")
    ex.add_argument("--corr", action="store_true", help="pair correlation F(r)")
    ex.add_argument("--nn", action="store_true", help="nearest-neighbour correlations")
    ex.add_argument("--figure", choices=sorted(FIGURES))
    ex.add_argument("--aggregation-limit", action="store_true", help="evaluate at x -> 0")
    ex.add_argument("--r-range", help="a:b, inclusive separations")

    ve = sub.add_parser("verify", help="run the invariant suite")
    ve.add_argument("--max-L", type=int, default=12)
    ve.add_argument("--identities-only", action="store_true")
    ve.add_argument("--tamper", action="store_true", help="perturb D to exercise the failure path")
    ve.add_argument("--out")

    si = sub.add_parser("simulate", help="Monte Carlo measurement")
    _add_model_args(si)
    si.add_argument("--sweeps", type=int, default=100_000)
    si.add_argument("--burn-in", type=int)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--replicas", type=int, default=1)
    si.add_argument("--dynamics", choices=("chip", "bond"), default="chip")
    si.add_argument("--initial", choices=[c.value for c in simulator.InitialCondition],
                    default="uniform-random")
    si.add_argument("--compare", action="store_true", help="add exact values and z-scores")

    orc = sub.add_parser("oracle", help="brute-force stationary state and audit")
    _add_model_args(orc)
    return ap


_VALUE_FLAGS = {"-p", "-pt", "--pt", "--x", "--nu"}


def _is_number(text: str) -> bool:
    try:
        to_scalar(text)
    except (ValueError, ZeroDivisionError):
        return False
    return True


def _join_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--nu -10`` as ``--nu=-10`` so argparse does not read ``-10`` as an option."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and _is_number(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def parse_spec(argv: list[str] | None = None) -> RunSpec:
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = vars(build_parser().parse_args(_join_negative_values(argv)))
    known = {f.name for f in fields(RunSpec)}
    return RunSpec(**{k: v for k, v in ns.items() if k in known and v is not None})


# ---------------------------------------------------------------------------
# parameter resolution


def _close(a, b, tol: float) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= tol


def _resolve_params(spec: RunSpec, need_rates: bool = False) -> ModelParams | None:
    raw = {k: getattr(spec, k) for k in ("p", "pt", "x", "nu")}
    given = {k: v for k, v in raw.items() if v is not None}
    if not given:
        if need_rates:
            raise UsageError("give -p and --pt")
        return None
    try:
        vals = {k: to_scalar(v) for k, v in given.items()}
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse parameter: {exc}") from exc
    decimal = not all(isinstance(v, Fraction) for v in vals.values())
    if decimal and spec.mode == "exact":
        raise UsageError("--mode exact needs rational 'a/b' parameters")
    if decimal:
        print("gtasep: warning: decimal input, this run uses float arithmetic", file=sys.stderr)
    if ("p" in vals) != ("pt" in vals):
        raise UsageError("-p and --pt must be given together")
    if "p" in vals:
        params = ModelParams(vals["p"], vals["pt"])
    elif "x" in vals:
        params = ModelParams.from_x(vals["x"])
    else:
        params = ModelParams.from_nu(vals["nu"])
    tol = 1e-12
    try:
        x = params.x
    except RepresentationError:
        x = None
    for key, want in (("x", lambda v: v), ("nu", lambda v: 1 - v)):
        if key in vals and x is not None and not _close(want(x), vals[key], tol):
            raise UsageError(f"--{key} {given[key]} is inconsistent with the other parameters")
        if key in vals and x is None:
            raise UsageError(f"--{key} cannot be checked: x is undefined at p = 1")
    if need_rates and not params.has_rates:
        raise UsageError("this command needs -p and --pt")
    if spec.mode == "float" or decimal:
        params = params.as_float()
    return params


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _header(spec: RunSpec) -> list[str]:
    return [f"# tool=gtasep {__version__}", f"# runspec={spec.to_json()}"]


def _emit(spec: RunSpec, lines: Iterable[str]) -> None:
    text = "\n".join([*_header(spec), *lines]) + "\n"
    if spec.out:
        with open(spec.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sizes(spec: RunSpec) -> tuple[int, int]:
    if spec.L is None or spec.N is None:
        raise UsageError("give -L and -N")
    if spec.L < 1 or not 0 <= spec.N <= spec.L:
        raise UsageError("need L >= 1 and 0 <= N <= L")
    return spec.L, spec.N


def _r_values(spec: RunSpec, L: int) -> range:
    if spec.r_range is None:
        return range(L - 1)
    try:
        a, b = (int(t) for t in spec.r_range.split(":"))
    except ValueError as exc:
        raise UsageError("--r-range takes a:b") from exc
    if not 0 <= a <= b <= L - 2:
        raise UsageError(f"--r-range must satisfy 0 <= a <= b <= {L - 2}")
    return range(a, b + 1)


# ---------------------------------------------------------------------------
# commands


def _figure_params(label: str, float_mode: bool) -> ModelParams:
    if label == "->1":
        params = ModelParams.from_x(0)
    else:
        params = ModelParams.from_nu(Fraction(label))
    return params.as_float() if float_mode else params


def cmd_exact(spec: RunSpec) -> list[str]:
    if spec.figure:
        L, N, series = FIGURES[spec.figure]
        rows = ["series,r,F"]
        for label in series:
            params = _figure_params(label, spec.mode == "float")
            name = "nu" + (label if label.startswith("->") else "=" + label)
            for r in _r_values(spec, L):
                rows.append(f"{name},{r},{_fmt(exact.pair_correlation(L, N, r, params).value)}")
        return rows
    L, N = _sizes(spec)
    if not (spec.Z or spec.current or spec.corr or spec.nn):
        raise UsageError("choose at least one of --Z, --current, --corr, --nn, --figure")
    if spec.aggregation_limit:
        if any(getattr(spec, k) is not None for k in ("p", "pt", "x", "nu")):
            raise UsageError("--aggregation-limit fixes x = 0; drop the other parameters")
        params = ModelParams.from_x(0)
        if spec.mode == "float":
            params = params.as_float()
    else:
        params = _resolve_params(spec)
    rows: list[str] = []
    if spec.Z:
        poly = exact.partition_poly_x(L, N)
        lo = 0 if N in (0, L) else 1
        coeffs = poly.coeffs[lo:]
        head = [f"x^{k}" for k in range(lo, lo + len(coeffs))]
        vals = [str(c) for c in coeffs]
        if params is not None:
            head.append("Z")
            vals.append(_fmt(exact.partition_function(L, N, params)))
        rows += [",".join(head), ",".join(vals)]
    if params is None and (spec.current or spec.corr or spec.nn):
        raise UsageError("give -p/--pt, --x, --nu or --aggregation-limit")
    if spec.current:
        if not params.has_rates:
            raise UsageError("--current needs -p and --pt")
        rows += ["L,N,current", f"{L},{N},{_fmt(exact.current(L, N, params))}"]
    if spec.corr:
        rows.append("r,F")
        rows += [f"{r},{_fmt(exact.pair_correlation(L, N, r, params).value)}" for r in _r_values(spec, L)]
    if spec.nn:
        rows.append("observable,value")
        rows.append(f"particle_particle,{_fmt(exact.nn_particle_particle(L, N, params))}")
        rows.append(f"particle_hole,{_fmt(exact.nn_particle_hole(L, N, params))}")
    return rows


class _Suite:
    """Ordered identity checks; stops at the first failure."""

    def __init__(self):
        self.lines: list[str] = []
        self.failed = False

    def check(self, name: str, anchor: str, fn: Callable[[], str | None]) -> bool:
        if self.failed:
            return False
        problem = fn()
        if problem is None:
            self.lines.append(f"PASS,{name},{anchor}")
            return True
        self.lines.append(f"FAIL,{name},{anchor}")
        self.lines.append(f"# counterexample: {problem}")
        self.failed = True
        return False


def _grid(n: int) -> list[Fraction]:
    return [Fraction(i, n) for i in range(1, n)]


def _algebra_check(tamper: bool):
    def run():
        for p in _grid(7):
            for pt in _grid(7):
                params = ModelParams(p, pt)
                for variant in ("canonical", "alternative"):
                    rep = mpa.build_rep(params, variant)
                    if tamper:
                        rep = mpa.perturb(rep, "D", 0, 0)
                    report = mpa.verify_algebra(rep)
                    if not report.passed:
                        return f"{variant} p={p} pt={pt}: {'; '.join(report.failures)}"
                    if variant == "canonical" and not mpa.verify_temperley_lieb(rep).passed:
                        return f"Temperley-Lieb p={p} pt={pt}"
        return None
    return run


def _density_check(max_L: int):
    def run():
        for L in range(1, max_L + 1):
            for N in range(1, L + 1):
                rep = exact.density_identity_report(L, N)
                bad = [k for k, ok in rep.items() if not ok]
                if bad:
                    return f"L={L} N={N}: {'; '.join(bad)}"
        return None
    return run


_ROUTE_GRID = [(Fraction(1, 2), Fraction(1, 4)), (Fraction(1, 3), Fraction(2, 3)),
               (Fraction(3, 4), Fraction(3, 4)), (Fraction(2, 5), Fraction(0))]


def _z_routes_check(max_L: int):
    def run():
        for p, pt in _ROUTE_GRID:
            params = ModelParams(p, pt)
            x = params.x
            for L in range(2, max_L + 1):
                for N in range(1, L):
                    a = exact.partition_poly_x(L, N).evaluate(x)
                    b = exact.partition_poly_nu(L, N).evaluate(1 - x)
                    c = mpa.grand_canonical_Z(L, N, params)
                    if not a == b == c:
                        return f"L={L} N={N} p={p} pt={pt}: {a}, {b}, {c}"
        return None
    return run


def _observable_routes_check(max_L: int):
    def run():
        for p, pt in _ROUTE_GRID:
            params = ModelParams(p, pt)
            for L in range(2, max_L + 1):
                for N in range(1, L):
                    if exact.current(L, N, params) != mpa.mpa_current(L, N, params):
                        return f"current L={L} N={N} p={p} pt={pt}"
                    if N >= 2:
                        for r in range(L - 1):
                            if exact.pair_correlation(L, N, r, params).value != mpa.mpa_pair_correlation(L, N, r, params):
                                return f"pair correlation L={L} N={N} r={r} p={p} pt={pt}"
        return None
    return run


def _weight_law_check(max_L: int):
    def run():
        for p, pt in _ROUTE_GRID:
            params = ModelParams(p, pt)
            for L in range(2, max_L + 1):
                for N in range(1, L):
                    pi = oracle.stationary(L, N, params)
                    if not pi.satisfies_weight_law():
                        return f"L={L} N={N} p={p} pt={pt}"
                    if oracle.oracle_observables(pi, params).current != exact.current(L, N, params):
                        return f"oracle current L={L} N={N} p={p} pt={pt}"
        return None
    return run


def cmd_verify(spec: RunSpec) -> tuple[list[str], bool]:
    if spec.max_L < 2:
        raise UsageError("--max-L must be at least 2")
    s = _Suite()
    s.lines.append("status,identity,anchor")
    if not spec.identities_only:
        s.check("quadratic algebra; reduced relations; F elimination; C_hat C = C C_hat; Temperley-Lieb",
                "rational grid 1/7..6/7", _algebra_check(spec.tamper))
    s.check("particle density; hole density; density difference identities in nu",
            f"1 <= N <= L <= {spec.max_L}", _density_check(spec.max_L))
    if not spec.identities_only:
        L1 = min(spec.max_L, 14)
        s.check("partition function: cluster sum = nu polynomial = matrix trace",
                f"1 <= N < L <= {L1}", _z_routes_check(L1))
        L2 = min(spec.max_L, 9)
        s.check("current and pair correlation: closed form = matrix trace",
                f"L <= {L2}", _observable_routes_check(L2))
        L3 = min(spec.max_L, 8)
        s.check("stationary weight law and current from exact linear solve",
                f"L <= {L3}", _weight_law_check(L3))
    return s.lines, not s.failed


def _compare_rows(rec: simulator.MeasurementRecord, params: ModelParams) -> list[str]:
    L, N = rec.sim.L, rec.sim.N
    ex_params = params
    rows = ["observable,index,exact,simulated,stderr,z"]

    def row(name, idx, ref, val, se):
        z = (val - float(ref)) / se if se > 0 else (0.0 if val == float(ref) else float("inf"))
        rows.append(f"{name},{idx},{_fmt(ref)},{val!r},{se!r},{z!r}")

    try:
        row("current", 0, exact.current(L, N, ex_params), rec.current, rec.current_stderr)
    except RepresentationError:
        pass
    if 2 <= N and 0 < N < L:
        for r in range(L - 1):
            ref = exact.pair_correlation(L, N, r, ex_params).value
            row("pair_correlation", r, ref, float(rec.pair_correlation[r]),
                float(rec.pair_correlation_stderr[r]))
    return rows


def cmd_simulate(spec: RunSpec) -> list[str]:
    L, N = _sizes(spec)
    params = _resolve_params(spec, need_rates=True)
    try:
        sim = simulator.SimConfig(
            L, N, params, spec.sweeps, spec.burn_in, spec.seed, spec.replicas,
            simulator.InitialCondition(spec.initial), spec.dynamics,
        )
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    rec = simulator.run(sim)
    if spec.compare:
        lines = [f"# {k}={v}" for k, v in rec.metadata()]
        return lines + _compare_rows(rec, params)
    return rec.to_csv().rstrip("\n").split("\n")


def cmd_oracle(spec: RunSpec) -> list[str]:
    L, N = _sizes(spec)
    params = _resolve_params(spec, need_rates=True)
    if not params.exact:
        raise UsageError("the oracle needs rational 'a/b' parameters")
    if comb(L, N) > oracle.MAX_STATES:
        raise oracle.SizeCapError(
            f"comb({L}, {N}) = {comb(L, N)} exceeds the oracle cap of {oracle.MAX_STATES}; use 'gtasep simulate'"
        )
    pi = oracle.stationary(L, N, params)
    obs = oracle.oracle_observables(pi, params)
    rows = ["observable,index,value,reference,residual"]
    for c, v, ref in zip(pi.configs, pi.probs, pi.weight_law_reference()):
        rows.append(f"pi,{c.to_word()},{v},{ref},{v - ref}")
    try:
        ref = exact.current(L, N, params)
        rows.append(f"current,0,{obs.current},{ref},{obs.current - ref}")
    except RepresentationError:
        rows.append(f"current,0,{obs.current},,")
    for i, d in enumerate(obs.density, start=1):
        ref = Fraction(N, L)
        rows.append(f"density,{i},{d},{ref},{d - ref}")
    if N >= 2:
        for r, g in enumerate(obs.pair_correlation):
            try:
                ref = exact.pair_correlation(L, N, r, params).value
                rows.append(f"pair_correlation,{r},{g},{ref},{g - ref}")
            except RepresentationError:
                rows.append(f"pair_correlation,{r},{g},,")
    return rows


def main(argv: list[str] | None = None) -> int:
    try:
        spec = parse_spec(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if spec.command == "exact":
            _emit(spec, cmd_exact(spec))
        elif spec.command == "verify":
            lines, ok = cmd_verify(spec)
            _emit(spec, lines)
            if not ok:
                print("verification failed", file=sys.stderr)
                return EXIT_VERIFY
        elif spec.command == "simulate":
            _emit(spec, cmd_simulate(spec))
        elif spec.command == "oracle":
            _emit(spec, cmd_oracle(spec))
    except oracle.SizeCapError as exc:
        print(f"gtasep: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, DomainError) as exc:
        print(f"gtasep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except oracle.ReducibleChainError as exc:
        print(f"gtasep: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
