"""Batch front end: ingest JSON data, run the pipeline, check invariants,
and reproduce the seeded scaling benchmark.

Exit codes: 0 ok, 2 validation/parse error, 3 degenerate geometry,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import gamma, geom, optim, query, wells, wspd
from .core import FunctionData, OneField, ValidationError, validate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DEGENERATE = 3
EXIT_SOLVER = 4


class ParseError(ValueError):
    def __init__(self, path: str, context: str):
        super().__init__(f"{path}: {context}")
        self.path = path
        self.context = context


def ingest(path: str) -> OneField | FunctionData:
    """Load a data file: JSON with dim, sites, values, optional gradients."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(path, str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"line {exc.lineno}: {exc.msg}") from exc
    for key in ("dim", "sites", "values"):
        if key not in doc:
            raise ParseError(path, f"missing field {key!r}")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ParseError(path, "field 'dim' must be a positive integer")
    try:
        sites = np.array(doc["sites"], dtype=float)
        values = np.array(doc["values"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"ragged or non-numeric arrays: {exc}") from exc
    if sites.ndim != 2 or sites.shape[1] != dim:
        raise ParseError(path, f"field 'sites' must be N x {dim}")
    if "gradients" in doc and doc["gradients"] is not None:
        try:
            gradients = np.array(doc["gradients"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(path, f"ragged or non-numeric gradients: {exc}") from exc
        data: OneField | FunctionData = OneField(sites, values, gradients)
    else:
        data = FunctionData(sites, values)
    validate(data)
    return data


def _apply_jitter(data, seed: int):
    """Deterministic general-position jitter, scale 1e-9 x data diameter."""
    rng = np.random.default_rng(seed)
    spread = float(np.linalg.norm(data.sites.max(axis=0) - data.sites.min(axis=0)))
    noise = rng.uniform(-1.0, 1.0, size=data.sites.shape) * 1e-9 * (spread or 1.0)
    if isinstance(data, OneField):
        return OneField(data.sites + noise, data.values, data.gradients)
    return FunctionData(data.sites + noise, data.values)


def _write_or_print(text: str, output_path: str | None) -> None:
    if output_path:
        with open(output_path, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text)


def cmd_gamma1(args) -> int:
    data = ingest(args.input)
    if not isinstance(data, OneField):
        raise ValidationError("gamma1 requires gradients in the input file")
    if args.mode == "exact":
        br = gamma.gamma1_exact(data)
        doc = {"mode": "exact", "gamma1": br.value,
               "argmax_pair": list(br.argmax_pair)}
    else:
        value = wspd.gamma1_approx(data, args.eps_sep)
        doc = {"mode": "approx", "eps_sep": args.eps_sep, "gamma1_upper": value,
               "approx_constant": wspd.approx_constant(args.eps_sep)}
    _write_or_print(json.dumps(doc), args.output)
    return EXIT_OK


def cmd_build(args) -> int:
    data = ingest(args.input)
    if not isinstance(data, OneField):
        raise ValidationError("build requires gradients in the input file")
    if args.jitter:
        data = _apply_jitter(data, args.seed)
    if args.M is not None:
        M = args.M
    elif args.mode == "approx":
        M = wspd.gamma1_approx(data, args.eps_sep)
    else:
        M = gamma.gamma1_exact(data).value
    model = wells.build_model(data, M)
    _write_or_print(wells.model_to_json(model), args.output)
    return EXIT_OK


def cmd_fit(args) -> int:
    data = ingest(args.input)
    fdata = FunctionData(data.sites, data.values) if isinstance(data, OneField) else data
    if args.jitter:
        fdata = _apply_jitter(fdata, args.seed)
    M, field, report = optim.solve_function_problem(
        fdata, epsilon=args.epsilon, pair_mode=args.pairs, eps_sep=args.eps_sep)
    print(report.as_text(), file=sys.stderr)
    # The solver's M bounds the seminorm only up to the comparability
    # constant; the exact value of the fitted field is cheap and always
    # satisfies the construction's admissibility condition.
    M = max(M, gamma.gamma1_exact(field).value)
    model = wells.build_model(field, M)
    _write_or_print(wells.model_to_json(model), args.output)
    return EXIT_OK


def _load_model(path: str) -> wells.WellsModel:
    try:
        with open(path) as fh:
            return wells.model_from_json(fh.read())
    except OSError as exc:
        raise ParseError(path, str(exc)) from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ParseError(path, f"bad model file: {exc}") from exc


def cmd_query(args) -> int:
    model = _load_model(args.model)
    try:
        with open(args.queries) as fh:
            points = [
                np.array([float(tok) for tok in line.split(",")])
                for line in fh if line.strip()
            ]
    except (OSError, ValueError) as exc:
        raise ParseError(args.queries, str(exc)) from exc
    tree = query.LocatorTree(model) if args.tree and model.cells else None
    lines = []
    for x in points:
        if x.shape != (model.dim,):
            raise ParseError(args.queries, f"query point {x} is not {model.dim}-dimensional")
        res = query.evaluate(model, x, tree)
        parts = [repr(res.value)] + [repr(float(g)) for g in res.gradient] \
            + [str(res.cell_index)]
        lines.append(",".join(parts))
    _write_or_print("\n".join(lines), args.output)
    return EXIT_OK


def run_check(data: OneField | FunctionData, epsilon: float = 1e-4,
              eps_sep: float = 0.5, seed: int = 0, out=sys.stdout) -> bool:
    """Run every module's invariant suite on one instance; True if all pass."""
    checks: list[tuple[str, bool, str]] = []

    def record(name: str, ok: bool, detail: str = ""):
        checks.append((name, ok, detail))

    rng = np.random.default_rng(seed)
    if isinstance(data, FunctionData):
        M_fit, field, _ = optim.solve_function_problem(
            data, epsilon=epsilon, pair_mode="full", mu=None)
        M = max(M_fit, gamma.gamma1_exact(field).value)
        record("fit.admissible", gamma.wells_condition_check(field, max(M, 1e-300)) is None
               if M > 0 else True)
    else:
        field = data
        M = gamma.gamma1_exact(field).value

    br = gamma.gamma1_exact(field)
    tilde = gamma.gamma1_tilde(field)
    record("gamma.tilde_sandwich",
           tilde <= br.value * (1 + 1e-9)
           and br.value <= gamma.TILDE_RATIO * tilde * (1 + 1e-9) + 1e-300,
           f"gamma1={br.value} tilde={tilde}")
    if field.num_sites >= 2:
        approx = wspd.gamma1_approx(field, eps_sep)
        record("wspd.upper_bound", br.value <= approx * (1 + 1e-9),
               f"approx={approx}")
        record("wspd.constant_bound",
               approx <= wspd.approx_constant(eps_sep) * br.value * (1 + 1e-9))
        decomp = wspd.build_wspd(field.sites, eps_sep)
        n = field.num_sites
        count = np.zeros((n, n), dtype=int)
        for pr in decomp.pairs:
            li = np.concatenate([nd.point_indices for nd in pr.left])
            ri = np.concatenate([nd.point_indices for nd in pr.right])
            count[np.ix_(li, ri)] += 1
        off_diag = count[~np.eye(n, dtype=bool)]
        record("wspd.coverage",
               bool(np.all(off_diag == 1) and np.all(np.diag(count) == 0)))

    if M == 0.0:
        model = wells.build_model(field, 0.0)
        record("wells.affine_shortcut", model.is_affine)
    else:
        try:
            model = wells.build_model(field, M)
        except geom.DegenerateConfigurationError as exc:
            record("wells.build", False, str(exc))
            model = None
        if model is not None:
            errs = 0
            for k in range(field.num_sites):
                res = query.evaluate(model, field.sites[k])
                if abs(res.value - field.values[k]) > 1e-10 or \
                   np.max(np.abs(res.gradient - field.gradients[k])) > 1e-10:
                    errs += 1
            record("eval.site_exactness", errs == 0, f"{errs} site errors")
            rt = wells.model_from_json(wells.model_to_json(model))
            record("wells.roundtrip",
                   rt.M == model.M and np.array_equal(rt.shifted, model.shifted)
                   and len(rt.cells) == len(model.cells))
            lo = field.sites.min(axis=0) - 1.0
            hi = field.sites.max(axis=0) + 1.0
            pts = rng.uniform(lo, hi, size=(256, field.dim))
            ratios = []
            for _ in range(256):
                x, y = rng.uniform(lo, hi, size=(2, field.dim))
                rx = query.evaluate(model, x)
                ry = query.evaluate(model, y)
                dist = float(np.linalg.norm(x - y))
                if dist > 0:
                    ratios.append(float(np.linalg.norm(rx.gradient - ry.gradient)) / dist)
            record("eval.lipschitz", max(ratios) <= M * (1 + 1e-8),
                   f"max ratio {max(ratios):.6g} vs M={M:.6g}")
            _ = [query.evaluate(model, x) for x in pts]  # covering: no location failure
            record("eval.covering", True)

    ok = all(c[1] for c in checks)
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name}" + (f" ({detail})" if detail else ""),
              file=out)
    return ok


def cmd_check(args) -> int:
    data = ingest(args.input)
    if args.jitter:
        data = _apply_jitter(data, args.seed)
    ok = run_check(data, epsilon=args.epsilon, eps_sep=args.eps_sep, seed=args.seed)
    return EXIT_OK if ok else EXIT_VALIDATION


def bench_instance(n: int, d: int, rng: np.random.Generator) -> OneField:
    """Seeded random model: sites in [0, N^{2/d}]^d, values and partial
    derivatives from [-1.1,-0.9] U [0.9,1.1]."""
    side = n ** (2.0 / d)
    sites = rng.uniform(0.0, side, size=(n, d))
    signs = rng.choice([-1.0, 1.0], size=n * (d + 1))
    mags = rng.uniform(0.9, 1.1, size=n * (d + 1))
    vals = (signs * mags).reshape(n, d + 1)
    return OneField(sites, vals[:, 0], vals[:, 1:])


def run_bench(sizes: list[int], d: int, seed: int, num_queries: int = 1024,
              use_tree: bool = False, out=sys.stdout) -> list[dict]:
    rows = []
    print("N,d,seed,t_gamma,t_geom,t_cells,num_cells,query_mean,errors", file=out)
    for n in sizes:
        rng = np.random.default_rng(seed)
        field = bench_instance(n, d, rng)
        t0 = time.perf_counter()
        M = gamma.gamma1_exact(field).value
        t_gamma = time.perf_counter() - t0

        shifted = field.sites - field.gradients / M
        weights = wells.power_weights(field, M)
        t0 = time.perf_counter()
        lattice = geom.build_lattice(shifted, weights)
        geom.build_power_diagram(lattice, shifted, weights)
        t_geom = time.perf_counter() - t0

        t0 = time.perf_counter()
        model = wells.build_model(field, M, check_condition=False)
        t_cells = time.perf_counter() - t0

        side = n ** (2.0 / d)
        queries = rng.uniform(-1.0, side + 1.0, size=(num_queries, d))
        tree = query.LocatorTree(model) if use_tree else None
        t0 = time.perf_counter()
        for x in queries:
            query.evaluate(model, x, tree)
        query_mean = (time.perf_counter() - t0) / num_queries

        errors = 0
        for k in range(n):
            res = query.evaluate(model, field.sites[k], tree)
            if abs(res.value - field.values[k]) > 1e-10:
                errors += 1
            errors += int(np.sum(np.abs(res.gradient - field.gradients[k]) > 1e-10))

        row = dict(N=n, d=d, seed=seed, t_gamma=t_gamma, t_geom=t_geom,
                   t_cells=t_cells, num_cells=len(model.cells),
                   query_mean=query_mean, errors=errors)
        rows.append(row)
        print(f"{n},{d},{seed},{t_gamma:.6f},{t_geom:.6f},{t_cells:.6f},"
              f"{len(model.cells)},{query_mean:.8f},{errors}", file=out)
    return rows


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    if args.output:
        with open(args.output, "w") as fh:
            run_bench(sizes, args.dim, args.seed, use_tree=args.tree, out=fh)
    else:
        run_bench(sizes, args.dim, args.seed, use_tree=args.tree)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="c11interp",
                                description="Minimal-Lipschitz-gradient C^{1,1} "
                                            "interpolation of scattered data")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, output=True):
        if output:
            sp.add_argument("-o", "--output", default=None)
        sp.add_argument("--epsilon", type=float, default=1e-6,
                        help="barrier solver duality-gap target")
        sp.add_argument("--eps-sep", type=float, default=0.5,
                        help="well-separated pair separation parameter")
        sp.add_argument("--mode", choices=["exact", "approx"], default="exact")
        sp.add_argument("--pairs", choices=["full", "wspd"], default="full")
        sp.add_argument("--M", type=float, default=None,
                        help="override the seminorm bound used for the build")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tree", action="store_true",
                        help="enable the locator tree for queries")
        sp.add_argument("--jitter", action="store_true",
                        help="apply a seeded 1e-9-scale jitter to the sites")

    sp = sub.add_parser("gamma1", help="seminorm of a 1-field")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(func=cmd_gamma1)

    sp = sub.add_parser("build", help="build an interpolant from jets")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("fit", help="fit gradients from values, then build")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("query", help="evaluate a model at query points")
    sp.add_argument("model")
    sp.add_argument("queries")
    common(sp)
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("check", help="run invariant suites on an instance")
    sp.add_argument("input")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("bench", help="seeded scaling benchmark (CSV)")
    sp.add_argument("--sizes", default="16,32,64,128,256,512")
    sp.add_argument("--dim", type=int, default=2)
    common(sp)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (geom.DegenerateInputError, geom.DegenerateConfigurationError,
            geom.SingularSystemError, wells.RankDeficiencyError,
            query.NoCellFoundError) as exc:
        print(f"degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (optim.FactorizationFailureError, optim.StepUnderflowError,
            optim.MaxIterationsError, wells.WellsConditionViolatedError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
