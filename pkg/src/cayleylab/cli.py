"""Command-line drivers.

Exit codes: 0 when every checked property holds, 1 when a violation was
found (the witness is still written), 2 for configuration or build errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import yaml

from . import families, fibred, marked, metrics, spectral

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2

BOUNDARY_CONVENTION = "folner ratio #(N_R(F) minus F) / #F"
CONVENTIONS = {
    "edges": spectral.EDGE_CONVENTION,
    "folner_boundary": BOUNDARY_CONVENTION,
    "ball_comparison": "edges between two outer-sphere vertices ignored",
    "multiplication": "Cayley edges g -> s g, word metric |g h^-1|, right actions",
}

_family = {
    "type": "object",
    "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
    "required": ["name"],
    "additionalProperties": False,
}
_pl = {
    "type": "object",
    "properties": {
        "points": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                              "minItems": 2, "maxItems": 2}},
        "tail": {"type": "number", "minimum": 0},
    },
    "required": ["points", "tail"],
    "additionalProperties": False,
}
_int_list = {"type": "array", "items": {"type": "integer"}}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "family": _family,
        "Rmax": {"type": "integer", "minimum": 0},
        "radii": _int_list,
        "limit_check": {"type": "boolean"},
        "spectral": {
            "type": "object",
            "properties": {
                "method": {"enum": ["auto", "dense", "lanczos"]},
                "poincare": {
                    "type": "object",
                    "properties": {"q": {"type": "number", "minimum": 1},
                                   "d": {"type": "integer", "minimum": 1},
                                   "trials": {"type": "integer", "minimum": 1}},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "fibred": {
            "type": "object",
            "properties": {
                "m": _int_list,
                "q": {"type": "number", "minimum": 1},
                "Rmax": {"type": "integer", "minimum": 0},
                "max_radius": {"type": "integer", "minimum": 0},
                "skip_first": {"type": "integer", "minimum": 0},
                "control": {"type": "object",
                            "properties": {"rho": _pl, "omega": _pl},
                            "required": ["rho", "omega"], "additionalProperties": False},
                "folner": {
                    "type": "object",
                    "properties": {"delta": {"type": "number", "exclusiveMinimum": 0},
                                   "shape": {"enum": ["ball", "coball"]},
                                   "mode": {"enum": ["chain", "literal"]}},
                    "additionalProperties": False,
                },
            },
            "required": ["m"],
            "additionalProperties": False,
        },
        "export": {
            "type": "object",
            "properties": {"index": {"type": "integer", "minimum": 0},
                           "radius": {"type": "integer", "minimum": 0}},
            "required": ["radius"],
            "additionalProperties": False,
        },
        "theorem_d": {
            "type": "object",
            "properties": {"lef": {"type": "string"}, "p": {"type": "integer"},
                           "l": _int_list, "search": {"type": "boolean"},
                           "Rmax": {"type": "integer", "minimum": 0}},
            "required": ["p", "l"],
            "additionalProperties": False,
        },
        "theorem_e": {
            "type": "object",
            "properties": {"l": _int_list, "p": {"type": "integer"}, "n": _int_list,
                           "radius": {"type": "integer", "minimum": 0},
                           "explicit": {"type": "boolean"}},
            "required": ["l", "p", "n"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        cfg = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    cfg = cfg or {}
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message}") from exc
    return cfg


def _require(cfg: dict, key: str) -> dict:
    if key not in cfg:
        raise ConfigError(f"config needs a '{key}' section")
    return cfg[key]


def _build(cfg: dict) -> families.Family:
    fam = _require(cfg, "family")
    return families.build_family(fam["name"], fam.get("params", {}))


def _label(x) -> str:
    return str(x)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


# ---------------------------------------------------------------------------
# jobs (module level so they pickle)

def _converge_job(job: tuple) -> tuple:
    name, params, i, Rmax = job
    fam = families.build_family(name, params)
    R = marked.convergence_radius(fam.member(i), fam.limit, Rmax)
    return _label(fam.labels[i]), R


def _spectrum_job(job: tuple) -> dict:
    name, params, i, method, seed, poinc = job
    fam = families.build_family(name, params)
    mg = fam.member(i)
    rep = spectral.spectrum_report(mg, name, _label(fam.labels[i]), method, seed)
    out = {"report": rep}
    if poinc:
        pr = spectral.poincare_check(mg, poinc.get("q", 2.0), poinc.get("d", 1),
                                     poinc.get("trials", 1000), seed=seed)
        out["poincare"] = pr
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_converge(cfg: dict, workers: int, seed: int | None) -> tuple[int, dict, str]:
    fam = _build(cfg)
    if fam.limit is None:
        raise ConfigError(f"family {fam.name} has no declared limit")
    Rmax = cfg.get("Rmax", 40)
    params = cfg["family"].get("params", {})
    rows = _map(_converge_job, [(fam.name, params, i, Rmax) for i in range(len(fam))], workers)
    Rs = [r for _, r in rows]
    nondec = all(a <= b for a, b in zip(Rs, Rs[1:]))
    result = {
        "family": fam.name, "limit": fam.limit.name, "derived_limit": fam.derived_limit,
        "Rmax": Rmax, "rows": [{"m": m, "R": r} for m, r in rows],
        "nondecreasing": nondec,
    }
    csv_text = "m,R\n" + "".join(f"{m},{r}\n" for m, r in rows)
    return (EXIT_OK if nondec else EXIT_VIOLATION), result, csv_text


def cmd_spectrum(cfg: dict, workers: int, seed: int | None) -> tuple[int, dict, str]:
    fam = _build(cfg)
    sp = cfg.get("spectral", {})
    poinc = sp.get("poincare")
    if poinc and seed is None:
        raise ConfigError("randomized Poincare trials need a seed")
    params = cfg["family"].get("params", {})
    jobs = [(fam.name, params, i, sp.get("method", "auto"), seed or 0, poinc)
            for i in range(len(fam))]
    outs = _map(_spectrum_job, jobs, workers)
    reports = [o["report"] for o in outs]
    ok = all(r.lambda1 > 0 for r in reports)
    result = json.loads(spectral.spectrum_table_json(reports))
    if poinc:
        pcs = [o["poincare"] for o in outs]
        ok = ok and all(p.passed for p in pcs)
        result["poincare"] = [
            {"m": r.m, "q": p.q, "d": p.d, "trials": p.trials, "C": p.C,
             "best_ratio": p.best_ratio, "passed": p.passed} for r, p in zip(reports, pcs)]
    result["seed"] = seed
    result["min_lambda1"] = min(r.lambda1 for r in reports)
    return (EXIT_OK if ok else EXIT_VIOLATION), result, spectral.spectrum_table_csv(reports)


def _control(spec: dict | None) -> metrics.ControlPair:
    if not spec:
        return metrics.ControlPair.identity()

    def pl(d):
        return metrics.PiecewiseLinear(tuple(tuple(p) for p in d["points"]), d["tail"])
    return metrics.ControlPair(pl(spec["rho"]), pl(spec["omega"]))


def cmd_fibred_roundtrip(cfg: dict, workers: int, seed: int | None) -> tuple[int, dict, str]:
    fc = _require(cfg, "fibred")
    q = fc.get("q", 2.0)
    cp = _control(fc.get("control"))
    seq = [families.cyclic(m) for m in fc["m"]]
    ee = fibred.translation_action()
    ee.cp = cp
    fe = fibred.build_from_action(seq, ee, fc.get("Rmax", 40), fc.get("max_radius"),
                                  fc.get("skip_first", 0), labels=fc["m"])
    vf = fibred.verify_fibred(fe, cp)
    rows = []
    ok = vf.passed
    fol = fc.get("folner")
    for i, m in enumerate(fc["m"]):
        fa = fibred.recover_fragmentary_finite(fe, i, q)
        vr = fibred.verify_fragmentary(fa)
        oc = fibred.orbit_control(fa, cp)
        row = {"m": m, "R_prime": fe.radii[i], "finite_defect": vr.max_defect,
               "finite_control": oc.passed}
        ok = ok and vr.passed and oc.passed
        if fol:
            delta = fol.get("delta", 0.2)
            F = metrics.choose_folner(seq[i], delta, fe.radii[i], fol.get("shape", "coball"),
                                      fe.cayleys[i])
            fb = fibred.recover_fragmentary_folner(fe, i, q, F, delta, fol.get("mode", "chain"), cp)
            fr = fibred.verify_fragmentary(fb)
            fo = fibred.orbit_control(fb, fibred.folner_envelope(fb))
            row.update({"folner_shape": F.shape, "folner_size": len(F.elements),
                        "folner_ratio": F.ratio, "folner_defect": fr.max_defect,
                        "folner_epsilon": fb.epsilon, "folner_control": fo.passed})
            ok = ok and fr.passed and fo.passed
        rows.append(row)
    result = {"fibred": vf.to_json(), "rows": rows, "q": q, "control": cp.to_json(),
              "boundary_convention": BOUNDARY_CONVENTION}
    head = sorted(rows[0]) if rows else []
    csv_text = ",".join(head) + "\n" + "".join(",".join(str(r.get(h, "")) for h in head) + "\n"
                                               for r in rows)
    return (EXIT_OK if ok else EXIT_VIOLATION), result, csv_text


def cmd_export(cfg: dict, workers: int, seed: int | None) -> tuple[int, dict, str]:
    fam = _build(cfg)
    ex = _require(cfg, "export")
    i = ex.get("index", 0)
    if not 0 <= i < len(fam):
        raise ConfigError(f"index {i} outside the family")
    mg = fam.member(i)
    b = marked.ball(mg, ex["radius"])
    return EXIT_OK, marked.ball_to_json(b), marked.ball_to_dot(b, f"{fam.name}_{i}")


def cmd_theorem_d(cfg: dict, workers: int, seed: int | None) -> tuple[int, dict, str]:
    td = _require(cfg, "theorem_d")
    lef = families.named_group(td.get("lef", "sym3"))
    trip = families.theorem_d_markings([lef] * len(td["l"]), td["p"], td["l"],
                                       Rmax=td.get("Rmax", 6), search=td.get("search", False))
    rows = []
    ok = True
    for t in trip:
        ok = ok and t.verified_h and t.verified_k
        rows.append({"n": t.n, "rank": t.rank, "field": t.field, "R": t.R, "r": t.r,
                     "diameter": t.diameter, "centers": [list(c) for c in t.centers],
                     "sizes": [t.S.k, t.T.k, t.U.k], "h_verified": t.verified_h,
                     "k_verified": t.verified_k, "conjugator_source": t.conjugator_source,
                     "input": "user-supplied LEF approximations"})
    return (EXIT_OK if ok else EXIT_VIOLATION), {"rows": rows}, ""


def cmd_theorem_e(cfg: dict, workers: int, seed: int | None) -> tuple[int, dict, str]:
    te = _require(cfg, "theorem_e")
    rows = []
    ok = True
    for l in te["l"]:
        pair = families.theorem_e_markings(l, te["p"], te["n"], te.get("explicit", False))
        extra_ok = (pair.Omega.generators[:8] == pair.Xi.generators
                    and pair.Omega.generators[8] == pair.Xi.group.translation(pair.J.generators[1]))
        ok = ok and pair.Xi.k == 8 and pair.Omega.k == 9 and extra_ok
        row = {"l": l, "rank": pair.rank, "cyclic_order": pair.cyclic_order, "field": pair.field,
               "Xi": pair.Xi.k, "Omega": pair.Omega.k, "Omega_extends_Xi": extra_ok}
        if "radius" in te:
            row["ball_vertices"] = len(marked.ball(pair.Xi, te["radius"]))
        rows.append(row)
    return (EXIT_OK if ok else EXIT_VIOLATION), {"rows": rows}, ""


COMMANDS = {
    "converge": cmd_converge,
    "spectrum": cmd_spectrum,
    "fibred-roundtrip": cmd_fibred_roundtrip,
    "export": cmd_export,
    "theorem-d": cmd_theorem_d,
    "theorem-e": cmd_theorem_e,
}


def _jsonable(x):
    if isinstance(x, float) and (math.isinf(x) or math.isnan(x)):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cayleylab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="YAML or JSON experiment file")
    ap.add_argument("--out", help="directory for the output file (stdout otherwise)")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--format", choices=["json", "csv", "dot"], default="json")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed")
        code, result, text = COMMANDS[args.command](cfg, args.workers, seed)
    except (ConfigError, ValueError, KeyError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.format == "json":
        payload = {"command": args.command, "seed": seed, "status": code, "result": result,
                   "conventions": CONVENTIONS}
        body = json.dumps(_jsonable(payload), sort_keys=True, indent=1) + "\n"
    else:
        if not text:
            print(f"error: {args.command} has no {args.format} output", file=sys.stderr)
            return EXIT_ERROR
        if (args.format == "dot") != (args.command == "export"):
            print(f"error: {args.format} output is not available for {args.command}", file=sys.stderr)
            return EXIT_ERROR
        body = text
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.{args.format}").write_text(body)
    else:
        sys.stdout.write(body)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
