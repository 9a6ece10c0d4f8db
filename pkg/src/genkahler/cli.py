"""Batch driver: identity-verification suites and deformation runs.

Three subcommands:

* ``verify-algebra`` -- seeded random property checks of the Clifford/spin
  layer and the star operator; no config needed.
* ``verify-hodge``   -- residuals of the operator-splitting identities on a
  configured torus background.
* ``deform``         -- run the order-by-order solver on a configured
  deformation family, verify the result at a finite parameter, and write
  the series and residual artifacts.

Exit codes: 0 all checks pass, 1 identity/residual failure, 2 precondition
failure, 64 usage or config error.  Reports are deterministic for a fixed
seed and config; wall-clock timings only ever appear in the residual CSV.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import clifford as cl
from . import fields as gf
from . import hodge as gh
from . import solver as sol
from . import structures as gs

SCHEMA = 1

USAGE_ERROR = 64


class ConfigError(ValueError):
    """Malformed or inconsistent configuration document."""


# ---------------------------------------------------------------------------
# canonical serialization


def _format_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("reports must contain finite numbers")
    return format(float(x), ".17g")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats,
    complex numbers as [re, im] pairs."""

    def emit(v) -> str:
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return _format_float(float(v))
        if isinstance(v, (complex, np.complexfloating)):
            return f"[{_format_float(v.real)}, {_format_float(v.imag)}]"
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, np.ndarray):
            return emit(v.tolist())
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(emit(x) for x in v) + "]"
        if isinstance(v, dict):
            items = sorted(v.items(), key=lambda kv: str(kv[0]))
            return "{" + ", ".join(f"{json.dumps(str(k))}: {emit(val)}" for k, val in items) + "}"
        raise TypeError(f"cannot serialize {type(v)!r}")

    return emit(obj) + "\n"


def _complex_pairs(vec: np.ndarray) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(vec, dtype=complex).ravel()]


def _matrix_pairs(mat: np.ndarray) -> list:
    mat = np.asarray(mat, dtype=complex)
    return [_complex_pairs(row) for row in mat]


# ---------------------------------------------------------------------------
# config handling


def _require_keys(doc: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _as_matrix(value, shape: tuple[int, int], where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise ConfigError(f"{where} must have shape {shape}, got {arr.shape}")
    return arr


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(
        doc,
        allowed={
            "schema",
            "dimension",
            "twist",
            "background",
            "seed_spinor",
            "frequency_box",
            "order",
            "verify_t",
            "verify_points",
            "tol",
            "tol_order",
            "tol_checks",
            "deformation",
        },
        required={"schema", "dimension"},
        where="config",
    )
    if doc["schema"] != SCHEMA:
        raise ConfigError(f"unsupported config schema {doc['schema']!r} (expected {SCHEMA})")
    m = doc["dimension"]
    if not isinstance(m, int) or not 1 <= m <= cl.MAX_DIM:
        raise ConfigError(f"dimension must be an integer in 1..{cl.MAX_DIM}")
    return doc


def build_twist(doc: dict, m: int) -> np.ndarray | None:
    entries = doc.get("twist", [])
    if not isinstance(entries, list):
        raise ConfigError("twist must be a list of [a, b, c, value] rows")
    if not entries:
        return None
    h = np.zeros((m, m, m))
    for row in entries:
        if not (isinstance(row, list) and len(row) == 4):
            raise ConfigError("each twist row must be [a, b, c, value]")
        a, b, c, value = row
        idx = [a, b, c]
        if any(not isinstance(i, int) or not 0 <= i < m for i in idx) or len(set(idx)) != 3:
            raise ConfigError(f"twist axes {idx} must be three distinct integers below {m}")
        for perm, sign in (
            ((a, b, c), 1), ((b, c, a), 1), ((c, a, b), 1),
            ((b, a, c), -1), ((a, c, b), -1), ((c, b, a), -1),
        ):
            h[perm] += sign * float(value)
    return h


def build_background(doc: dict, m: int) -> gs.HermitianPair:
    block = doc.get("background", {"kind": "kaehler"})
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("background must be an object with a 'kind'")
    kind = block["kind"]
    if kind == "kaehler":
        _require_keys(block, {"kind", "metric"}, {"kind"}, "background")
        if m % 2:
            raise ConfigError("kaehler backgrounds need an even dimension")
        metric = _as_matrix(block["metric"], (m, m), "background.metric") if "metric" in block else np.eye(m)
        try:
            return gs.HermitianPair.from_kahler(gs.standard_complex_structure(m), metric)
        except ValueError as exc:
            raise ConfigError(f"background is not a valid pair: {exc}") from exc
    if kind == "explicit":
        _require_keys(
            block, {"kind", "metric", "b_field", "base_complex", "symplectic_form"}, {"kind", "metric"}, "background"
        )
        metric = _as_matrix(block["metric"], (m, m), "background.metric")
        b_field = _as_matrix(block["b_field"], (m, m), "background.b_field") if "b_field" in block else None
        has_complex = "base_complex" in block
        has_symplectic = "symplectic_form" in block
        if has_complex == has_symplectic:
            raise ConfigError("explicit backgrounds need exactly one of base_complex or symplectic_form")
        if has_complex:
            J1 = gs.complex_structure_gcs(_as_matrix(block["base_complex"], (m, m), "background.base_complex"))
        else:
            J1 = gs.symplectic_gcs(_as_matrix(block["symplectic_form"], (m, m), "background.symplectic_form"))
        try:
            return gs.HermitianPair.from_metric(J1, metric, b_field)
        except ValueError as exc:
            raise ConfigError(f"background is not a valid pair: {exc}") from exc
    raise ConfigError(f"unknown background kind {kind!r}")


def build_seed(doc: dict, pair: gs.HermitianPair) -> tuple[np.ndarray, complex]:
    choice = doc.get("seed_spinor", "canonical")
    scale = complex(1.0)
    if choice == "canonical":
        pass
    elif isinstance(choice, dict):
        _require_keys(choice, {"scale"}, {"scale"}, "seed_spinor")
        raw = choice["scale"]
        if isinstance(raw, list) and len(raw) == 2:
            scale = complex(float(raw[0]), float(raw[1]))
        elif isinstance(raw, (int, float)):
            scale = complex(float(raw))
        else:
            raise ConfigError("seed_spinor.scale must be a number or [re, im]")
        if scale == 0:
            raise ConfigError("seed_spinor.scale must be nonzero")
    else:
        raise ConfigError("seed_spinor must be 'canonical' or {'scale': ...}")
    return scale * pair.canonical_generator(2), scale


def _one_form_from_modes(modes, m: int) -> gf.FourierField:
    xi = gf.FourierField(m, m)
    if not isinstance(modes, list) or not modes:
        raise ConfigError("exact-b-field needs a non-empty list of one_form modes")
    for mode in modes:
        if not isinstance(mode, dict):
            raise ConfigError("one_form modes must be objects")
        _require_keys(mode, {"frequency", "cos", "sin"}, {"frequency"}, "one_form mode")
        k = mode["frequency"]
        if not (isinstance(k, list) and len(k) == m and all(isinstance(v, int) for v in k)):
            raise ConfigError(f"mode frequency must be {m} integers")
        if not any(k):
            raise ConfigError("one_form modes need a nonzero frequency")
        cosv = np.asarray(mode.get("cos", [0.0] * m), dtype=float)
        sinv = np.asarray(mode.get("sin", [0.0] * m), dtype=float)
        if cosv.shape != (m,) or sinv.shape != (m,):
            raise ConfigError(f"mode coefficients must be length-{m} lists")
        key = tuple(k)
        mirror = tuple(-v for v in k)
        xi.coeffs[key] = xi[key] + 0.5 * (cosv - 1j * sinv)
        xi.coeffs[mirror] = xi[mirror] + 0.5 * (cosv + 1j * sinv)
    return xi


def _series_from_doc(terms, m: int) -> sol.SeriesSoField:
    if not isinstance(terms, list) or not terms:
        raise ConfigError("explicit-series needs a non-empty list of per-order term lists")
    parsed = [None]
    for order, modes in enumerate(terms, start=1):
        if not isinstance(modes, list):
            raise ConfigError(f"explicit-series order {order} must be a list of modes")
        term = gf.FourierOperatorField(m, 2 * m)
        for mode in modes:
            if not isinstance(mode, dict):
                raise ConfigError("explicit-series modes must be objects")
            _require_keys(mode, {"frequency", "real", "imag"}, {"frequency", "real"}, "series mode")
            k = mode["frequency"]
            if not (isinstance(k, list) and len(k) == m and all(isinstance(v, int) for v in k)):
                raise ConfigError(f"mode frequency must be {m} integers")
            mat = np.asarray(mode["real"], dtype=float).astype(complex)
            if "imag" in mode:
                mat = mat + 1j * np.asarray(mode["imag"], dtype=float)
            if mat.shape != (2 * m, 2 * m):
                raise ConfigError(f"series matrices must be {2 * m}x{2 * m}")
            term.coeffs[tuple(k)] = term[tuple(k)] + mat
        parsed.append(term)
    try:
        return sol.SeriesSoField(m, parsed)
    except ValueError as exc:
        raise ConfigError(f"explicit-series is not a valid family: {exc}") from exc


def build_deformation(doc: dict, pair: gs.HermitianPair, order_cap: int) -> list[sol.SeriesSoField]:
    items = doc.get("deformation")
    if not isinstance(items, list) or not items:
        raise ConfigError("deform needs a non-empty 'deformation' list")
    m = pair.m
    factors = []
    for item in items:
        if not isinstance(item, dict) or "kind" not in item:
            raise ConfigError("each deformation primitive must be an object with a 'kind'")
        kind = item["kind"]
        if kind == "constant-bivector":
            _require_keys(item, {"kind", "vectors", "scale"}, {"kind", "vectors"}, "constant-bivector")
            idx = item["vectors"]
            n = m // 2
            if not (isinstance(idx, list) and len(idx) == 2 and all(isinstance(i, int) and 0 <= i < n for i in idx)):
                raise ConfigError(f"constant-bivector vectors must be two indices below {n}")
            if idx[0] == idx[1]:
                raise ConfigError("constant-bivector vectors must be distinct")
            base = -pair.J1[:m, :m]
            u = np.linalg.svd(0.5 * (np.eye(m) - 1j * base))[0][:, :n]
            biv = np.outer(u[:, idx[0]], u[:, idx[1]]) - np.outer(u[:, idx[1]], u[:, idx[0]])
            alpha = float(item.get("scale", 1.0)) * cl.bivector_so((biv + biv.conj()).real)
            factors.append(sol.SeriesSoField.linear(m, alpha))
        elif kind == "exact-b-field":
            _require_keys(item, {"kind", "one_form"}, {"kind", "one_form"}, "exact-b-field")
            xi = _one_form_from_modes(item["one_form"], m)
            generator = gf.one_form_differential(xi).map_values(cl.two_form_so)
            target = sol.conjugated_structure_series(generator, pair.J1, order_cap)
            try:
                factors.append(sol.extract_transverse_family(pair.J1, target, order_cap))
            except ValueError as exc:
                raise ConfigError(f"exact-b-field family extraction failed: {exc}") from exc
        elif kind == "explicit-series":
            _require_keys(item, {"kind", "terms"}, {"kind", "terms"}, "explicit-series")
            factors.append(_series_from_doc(item["terms"], m))
        else:
            raise ConfigError(f"unknown deformation kind {kind!r}")
    return factors


def _tolerances(doc: dict, tol_override: float | None) -> dict[str, float]:
    tol = doc.get("tol", 1e-9)
    out = {
        "tol": float(tol_override if tol_override is not None else tol),
        "tol_order": float(tol_override if tol_override is not None else doc.get("tol_order", 1e-9)),
        "tol_checks": float(doc.get("tol_checks", 1e-10)),
    }
    for name, value in out.items():
        if value <= 0:
            raise ConfigError(f"{name} must be positive")
    return out


# ---------------------------------------------------------------------------
# report plumbing


def _emit(report: dict, text_lines: list[str], out_dir: str | None, as_json: bool) -> None:
    text = "\n".join(text_lines) + "\n"
    if out_dir is not None:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / "report.json").write_text(canonical_json(report), encoding="utf-8")
        (path / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(canonical_json(report) if as_json else text)


def _check_lines(checks: list[dict]) -> list[str]:
    lines = []
    for chk in checks:
        status = "PASS" if chk["pass"] else "FAIL"
        lines.append(f"{status} {chk['name']}: max_residual {chk['max_residual']:.3e} (tol {chk['tol']:.1e})")
    return lines


# ---------------------------------------------------------------------------
# verify-algebra


def _random_form(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.normal(size=cl.spinor_dim(m)) + 1j * rng.normal(size=cl.spinor_dim(m))


def _random_vector(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.normal(size=2 * m) + 1j * rng.normal(size=2 * m)


def cmd_verify_algebra(args) -> int:
    rng = np.random.default_rng(args.seed)
    n_max = args.n_max
    trials = args.trials
    tol = args.tol
    if n_max < 1 or n_max > cl.MAX_DIM:
        raise ConfigError(f"--n-max must be in 1..{cl.MAX_DIM}")
    if trials < 0:
        raise ConfigError("--trials must be nonnegative")

    dims = list(range(1, n_max + 1))
    even_dims = [m for m in dims if m % 2 == 0]
    results: dict[str, float] = {}

    def record(name: str, value: float) -> None:
        results[name] = max(results.get(name, 0.0), float(value))

    for trial in range(trials):
        m = dims[trial % len(dims)]
        v = _random_vector(rng, m)
        C = cl.clifford_vector_matrix(v)
        record("clifford_square", np.linalg.norm(C @ C - cl.natural_pairing(v, v) * np.eye(cl.spinor_dim(m))))

        alpha = cl.random_so_element(rng, m)
        S = cl.spin_lie_action(alpha)
        record(
            "spin_equivariance",
            np.linalg.norm(S @ C - C @ S - cl.clifford_vector_matrix(alpha @ v)),
        )
        small = 0.2 * alpha
        E = cl.so_exp(small)
        R = cl.spin_group_exp(small)
        record(
            "group_equivariance",
            np.linalg.norm(R @ C @ np.linalg.inv(R) - cl.clifford_vector_matrix(E @ v)),
        )

        f = _random_form(rng, m)
        g = _random_form(rng, m)
        sign = cl.chevalley_symmetry_sign(m)
        record(
            "pairing_symmetry",
            abs(cl.chevalley_pairing(f, g) - sign * cl.chevalley_pairing(g, f)),
        )
        record(
            "transpose_reversal",
            np.linalg.norm(
                cl.transpose_form(cl.wedge(f, g)) - cl.wedge(cl.transpose_form(g), cl.transpose_form(f))
            ),
        )

        if even_dims:
            me = even_dims[trial % len(even_dims)]
            pair = gs.random_hermitian_pair(rng, me)
            star = gs.hodge_star(pair.metric, pair.b_field, pair.orientation)
            if args.debug_flip_star_sign:
                star = -star
            vol = gs.volume_spin_element(pair.J1, pair.proj1) @ gs.volume_spin_element(pair.J2, pair.proj2)
            record("star_matches_volume_product", np.linalg.norm(star + vol) / max(np.linalg.norm(vol), 1.0))

            gram = gh.l2_gram(pair)
            record("metric_pairing_symmetric", np.linalg.norm(gram - gram.T) + np.linalg.norm(gram.imag))
            record("metric_pairing_positive", max(0.0, -float(np.min(np.linalg.eigvalsh(gram.real)))))

    checks = [
        {"name": name, "max_residual": value, "tol": tol, "pass": bool(value <= tol)}
        for name, value in sorted(results.items())
    ]
    ok = all(c["pass"] for c in checks)
    report = {
        "schema": SCHEMA,
        "suite": "verify-algebra",
        "seed": args.seed,
        "n_max": n_max,
        "trials": trials,
        "tol": tol,
        "checks": checks,
        "ok": ok,
    }
    lines = [f"suite: verify-algebra (seed {args.seed}, n_max {n_max}, trials {trials})"]
    lines += _check_lines(checks)
    lines.append(f"result: {'ok' if ok else 'FAILED'}")
    _emit(report, lines, args.out, args.json)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# verify-hodge


def _operator_residual(op: gh.BlockOperator, scale: float) -> float:
    return op.coeff_norm() / max(scale, 1e-300)


def cmd_verify_hodge(args) -> int:
    doc = load_config(args.config)
    m = doc["dimension"]
    if m % 2:
        raise ConfigError("verify-hodge needs an even dimension")
    tols = _tolerances(doc, args.tol)
    tol = tols["tol"]
    pair = build_background(doc, m)
    h = build_twist(doc, m)
    box = doc.get("frequency_box", 1)
    if not isinstance(box, int) or box < 1:
        raise ConfigError("frequency_box must be a positive integer")
    support = gf.frequencies_box(m, box)
    bg = gh.TorusBackground(pair, support, h)

    D = bg.derivative
    scale = D.coeff_norm()
    checks: list[dict] = []
    info: dict[str, object] = {}

    def add(name: str, value: float, tol_here: float = tol) -> None:
        checks.append({"name": name, "max_residual": float(value), "tol": tol_here, "pass": bool(value <= tol_here)})

    # every graded shift, split into the level-one part and the torsion part
    level_one = None
    torsion_first = 0.0
    torsion_second = 0.0
    full = None
    for shift in gh.COMPONENT_SHIFTS:
        comp = gh.component_operator(shift, pair, support, h, derivative=D)
        full = comp if full is None else full + comp
        if abs(shift[0]) == 1 and abs(shift[1]) == 1:
            level_one = comp if level_one is None else level_one + comp
        else:
            norm = comp.coeff_norm()
            if abs(shift[0]) == 3:
                torsion_first = max(torsion_first, norm)
            if abs(shift[1]) == 3:
                torsion_second = max(torsion_second, norm)
    add("component_sum_reproduces_derivative", _operator_residual(D - full, scale))
    info["first_structure_torsion"] = torsion_first / max(scale, 1e-300)
    info["second_structure_torsion"] = torsion_second / max(scale, 1e-300)
    integrable = max(torsion_first, torsion_second) <= tol * max(scale, 1e-300)
    info["background_integrable"] = bool(integrable)

    if integrable:
        add("level_one_components_suffice", _operator_residual(D - level_one, scale))
        ops = bg.components
        dplus, dminus = ops["delta+"], ops["delta-"]
        dbplus, dbminus = ops["delta_bar+"], ops["delta_bar-"]
        sq = max(
            _operator_residual(dplus @ dplus, scale**2),
            _operator_residual(dminus @ dminus, scale**2),
            _operator_residual(dbplus @ dbplus, scale**2),
            _operator_residual(dbminus @ dbminus, scale**2),
        )
        add("component_squares_vanish", sq)
        anti = max(
            _operator_residual(dplus @ dminus + dminus @ dplus, scale**2),
            _operator_residual(dplus @ dbminus + dbminus @ dplus, scale**2),
        )
        add("opposite_components_anticommute", anti)
        mixed = _operator_residual(
            (dplus @ dbplus + dbplus @ dplus) + (dminus @ dbminus + dbminus @ dminus), scale**2
        )
        add("mixed_anticommutators_cancel", mixed)

        adj_plus = bg.adjoint(dplus)
        adj_minus = bg.adjoint(dminus)
        add("plus_adjoint_is_minus_conjugate", _operator_residual(adj_plus + dbplus, scale))
        add("minus_adjoint_is_plus_conjugate", _operator_residual(adj_minus - dbminus, scale))

        lap_full = gh.laplacian(D, bg.gram)
        ratios = []
        for name in ("delta+", "delta-", "delta_bar+", "delta_bar-"):
            lap = gh.laplacian(ops[name], bg.gram)
            ratios.append(_operator_residual(lap_full - 4.0 * lap, scale**2))
        add("full_laplacian_is_four_times_each", max(ratios))

        G = bg.green
        lap = bg.laplace
        eye = gh.BlockOperator.identity(m, cl.spinor_dim(m), support)
        add("green_commutes_with_laplacian", _operator_residual(G @ lap - lap @ G, 1.0))
        add("green_plus_harmonic_resolve_identity", _operator_residual(lap @ G + bg.harmonic - eye, 1.0))
        g_other = gh.green_operator(gh.laplacian(ops["delta_bar-"], bg.gram), bg.gram)
        add("green_agrees_across_components", _operator_residual(G - g_other, max(G.coeff_norm(), 1e-300)))
    else:
        info["skipped_checks"] = "background not generalized Kahler: splitting identities not applicable"

    ok = all(c["pass"] for c in checks)
    report = {
        "schema": SCHEMA,
        "suite": "verify-hodge",
        "dimension": m,
        "frequency_box": box,
        "tol": tol,
        "twist": None if h is None else np.asarray(h).tolist(),
        "checks": checks,
        "info": info,
        "ok": ok,
    }
    lines = [f"suite: verify-hodge (dimension {m}, box {box})"]
    lines.append(f"first-structure torsion level: {info['first_structure_torsion']:.3e}")
    lines.append(f"second-structure torsion level: {info['second_structure_torsion']:.3e}")
    if not integrable:
        lines.append("background is not generalized Kahler; splitting identities skipped")
    lines += _check_lines(checks)
    lines.append(f"result: {'ok' if ok else 'FAILED'}")
    _emit(report, lines, args.out, args.json)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# deform


def _series_record(report: sol.SolutionReport) -> dict:
    betas = []
    for j, beta in enumerate(report.betas, start=1):
        modes = [
            {"frequency": list(k), "matrix": _matrix_pairs(v)}
            for k, v in sorted(beta.coeffs.items())
        ]
        betas.append({"order": j, "modes": modes})
    psi = []
    for j in range(report.order_cap + 1):
        term = report.psi_series.term(j)
        modes = [
            {"frequency": list(k), "vector": _complex_pairs(v)}
            for k, v in sorted(term.coeffs.items())
        ]
        psi.append({"order": j, "modes": modes})
    return {"schema": SCHEMA, "order_cap": report.order_cap, "betas": betas, "psi": psi}


def _residual_csv(report: sol.SolutionReport) -> str:
    lines = ["order,residual_norm,beta_norm,wall_ms"]
    for j in range(1, report.order_cap + 1):
        wall = report.order_wall_ms[j - 1] if j - 1 < len(report.order_wall_ms) else 0.0
        lines.append(
            f"{j},{report.residual_norms[j]:.17g},{report.beta_norms[j - 1]:.17g},{wall:.3f}"
        )
    return "\n".join(lines) + "\n"


def cmd_deform(args) -> int:
    doc = load_config(args.config)
    m = doc["dimension"]
    if m % 2:
        raise ConfigError("deform needs an even dimension")
    order_cap = args.order if args.order is not None else doc.get("order", 4)
    if not isinstance(order_cap, int) or not 1 <= order_cap <= sol.MAX_ORDER:
        raise ConfigError(f"order must be an integer in 1..{sol.MAX_ORDER}")
    tols = _tolerances(doc, args.tol)
    verify_t = float(doc.get("verify_t", 1e-2))
    verify_points = doc.get("verify_points", 16)
    if not isinstance(verify_points, int) or verify_points < 1:
        raise ConfigError("verify_points must be a positive integer")

    pair = build_background(doc, m)
    h = build_twist(doc, m)
    seed_spinor, scale = build_seed(doc, pair)
    factors = build_deformation(doc, pair, order_cap)

    try:
        report = sol.run_deformation(
            factors,
            pair,
            h=h,
            order_cap=order_cap,
            psi=seed_spinor,
            tol_order=tols["tol_order"],
            tol_checks=tols["tol_checks"],
        )
    except sol.IntegrabilityError as exc:
        _emit(
            {"schema": SCHEMA, "suite": "deform", "ok": False, "error": str(exc), "failed_order": exc.order},
            ["suite: deform", f"precondition failure: {exc}", "result: FAILED"],
            args.out,
            args.json,
        )
        return 2
    except ValueError as exc:
        _emit(
            {"schema": SCHEMA, "suite": "deform", "ok": False, "error": str(exc)},
            ["suite: deform", f"identity failure: {exc}", "result: FAILED"],
            args.out,
            args.json,
        )
        return 1

    check_full = sol.verify_gk_at_t(report, verify_t, count=verify_points, seed=args.seed)
    check_half = sol.verify_gk_at_t(report, 0.5 * verify_t, count=verify_points, seed=args.seed)
    ratio = None
    if check_half["derivative_sup"] > 0:
        ratio = check_full["derivative_sup"] / check_half["derivative_sup"]

    blob = report.as_dict()
    blob.update(
        {
            "schema": SCHEMA,
            "suite": "deform",
            "seed": args.seed,
            "seed_spinor_scale": scale,
            "tolerances": tols,
            "verification": {
                "at_t": check_full,
                "at_half_t": check_half,
                "halving_ratio": ratio,
                "expected_ratio": float(2 ** (order_cap + 1)),
            },
        }
    )

    lines = [f"suite: deform (dimension {m}, order cap {order_cap})"]
    lines.append(f"seed-spinor norm: {report.psi_norm:.6g} (scale {scale.real:+.3g}{scale.imag:+.3g}i)")
    lines.append(f"support: {len(report.support)} frequencies")
    for j in range(1, order_cap + 1):
        lines.append(
            f"PASS order {j}: obstruction {report.rho_norms[j-1]:.3e} "
            f"correction {report.beta_norms[j-1]:.3e} residual {report.residual_norms[j]:.3e}"
        )
    lines.append(
        f"verification at t={verify_t:g}: min metric eig {check_full['metric_min_eig']:.6g}, "
        f"derivative sup {check_full['derivative_sup']:.3e}"
    )
    if ratio is not None:
        lines.append(f"halving ratio: {ratio:.2f} (expected about {2 ** (order_cap + 1)})")
    lines.append("result: ok")

    _emit(blob, lines, args.out, args.json)
    if args.out is not None:
        path = Path(args.out)
        (path / "residuals.csv").write_text(_residual_csv(report), encoding="utf-8")
        (path / "series.json").write_text(canonical_json(_series_record(report)), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit with 64, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="genkahler", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    va = sub.add_parser("verify-algebra", help="seeded random checks of the Clifford/spin layer")
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--n-max", type=int, default=3, help="largest torus dimension to draw")
    va.add_argument("--trials", type=int, default=200)
    va.add_argument("--tol", type=float, default=1e-9)
    va.add_argument("--out", type=str, default=None, help="directory for report.json / report.txt")
    va.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    va.add_argument(
        "--debug-flip-star-sign",
        action="store_true",
        help="negative control: corrupt the star operator and expect failure",
    )
    va.set_defaults(func=cmd_verify_algebra)

    vh = sub.add_parser("verify-hodge", help="operator-splitting identities on a configured background")
    vh.add_argument("--config", type=str, required=True)
    vh.add_argument("--tol", type=float, default=None, help="override the config tolerance")
    vh.add_argument("--out", type=str, default=None)
    vh.add_argument("--json", action="store_true")
    vh.set_defaults(func=cmd_verify_hodge)

    df = sub.add_parser("deform", help="run the order-by-order deformation solver")
    df.add_argument("--config", type=str, required=True)
    df.add_argument("--order", type=int, default=None, help="override the config order cap")
    df.add_argument("--tol", type=float, default=None, help="override the config tolerances")
    df.add_argument("--seed", type=int, default=0, help="sample-point seed for verification")
    df.add_argument("--out", type=str, default=None)
    df.add_argument("--json", action="store_true")
    df.set_defaults(func=cmd_deform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"genkahler: config error: {exc}\n")
        return USAGE_ERROR
    except sol.IntegrabilityError as exc:
        sys.stderr.write(f"genkahler: precondition failure: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
