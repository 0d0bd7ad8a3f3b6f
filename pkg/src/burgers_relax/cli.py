"""Command-line interface.

Every failure prints one line ``burgers-relax: error[<kind>]: <message>`` to
stderr and exits nonzero (2 for input errors, 1 for failed checks, 3 for
numerical failures).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .block_operator import BlockVector, MaterialError, quadratic_identity_residual
from .bvs_fem import DecayConfig, MeshError, run_decay_experiment, structured_mesh
from .constitutive import HistoryError, convolve, integrate_internal, read_strain_csv, write_trace_csv
from .io import (ConfigError, ModelConfig, load_config, max_threads, parse_tgrid, region_groups,
                 tensor_labels, write_csv)
from .relax_exp import (CertificateError, G_trace, build_evaluator, decay_certificate,
                        load_evaluator, save_evaluator, verify_estimates)
from .relax_laplace import (COMMUTE_TOL, ConditioningError, NonCommutingError, G_trace_prony,
                            build_prony, write_prony_table)
from .samples import random_commuting_material, random_material
from .tensor_core import TensorError, check_admissibility, commute_residual

PROG = "burgers-relax"
EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 1, 2, 3
DEFAULT_TGRID = "0:10:101"


@dataclass
class Suite:
    name: str
    passed: bool
    worst: float = 0.0
    location: str = ""
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.worst = float(self.worst)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "worst": self.worst,
                "location": self.location, "detail": self.detail}


@dataclass
class Report:
    command: str
    suites: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def add(self, *args, **kw) -> Suite:
        s = Suite(*args, **kw)
        self.suites.append(s)
        return s

    def to_dict(self) -> dict:
        return {"command": self.command, "passed": self.passed,
                "suites": [s.to_dict() for s in self.suites], "data": self.data}

    def to_text(self) -> str:
        lines = [f"{self.command}: {'PASS' if self.passed else 'FAIL'}"]
        for s in self.suites:
            line = f"  [{'pass' if s.passed else 'FAIL'}] {s.name}: worst={s.worst:.3g}"
            if s.location:
                line += f" at {s.location}"
            if s.detail:
                line += f" ({s.detail})"
            lines.append(line)
        for k, v in self.data.items():
            lines.append(f"  {k}: {v}")
        return "\n".join(lines)


def _commuting(cfg: ModelConfig):
    worst, pair = 0.0, None
    for i in range(len(cfg.tensors)):
        for j in range(i + 1, len(cfg.tensors)):
            r = commute_residual(cfg.tensors[i], cfg.tensors[j])
            if r > worst:
                worst, pair = r, (i, j)
    return worst <= cfg.tolerance("commute", COMMUTE_TOL), worst, pair


def _grid(args, cfg: ModelConfig) -> np.ndarray:
    return parse_tgrid(args.tgrid or cfg.run.get("tgrid", DEFAULT_TGRID))


def cmd_validate(args, cfg: ModelConfig) -> Report:
    rep = Report("validate")
    adm = check_admissibility(cfg.tensors, cfg.viscosities)
    rep.add("admissibility", adm.passed, 0.0 if adm.passed else 1.0,
            detail=adm.summary())
    rep.add("symmetry", max(adm.symmetry_residuals, default=0.0) <= 1e-14,
            max(adm.symmetry_residuals, default=0.0))
    rep.add("positivity", adm.c_min > 0 and adm.eta_min > 0, min(adm.c_min, adm.eta_min))
    ok, worst, pair = _commuting(cfg)
    rep.data["commuting"] = "yes" if ok else "no (L-method unavailable)"
    rep.data["commute_residual"] = worst
    if pair is not None:
        rep.data["least_commuting_pair"] = f"C_{pair[0]}, C_{pair[1]}"
    for r, reg in enumerate(cfg.regions):
        radm = check_admissibility(reg["tensors"], reg["viscosities"])
        rep.add(f"region {r} admissibility", radm.passed, detail=radm.summary())
    if adm.passed:
        b = build_evaluator(cfg.material()).bounds
        rep.data["bounds"] = {"alpha1": b.alpha1, "alpha2": b.alpha2, "beta1": b.beta1, "beta2": b.beta2}
    return rep


def _evaluator(args, cfg: ModelConfig):
    m = cfg.material()
    path = getattr(args, "evaluator", None)
    if path:
        try:
            return m, load_evaluator(path, m)
        except (FileNotFoundError, ValueError):
            pass  # missing or stale: rebuild
        ev = build_evaluator(m)
        save_evaluator(ev, path)
        return m, ev
    return m, build_evaluator(m)


def cmd_relax(args, cfg: ModelConfig) -> Report:
    rep = Report("relax")
    times = _grid(args, cfg)
    m, ev = _evaluator(args, cfg)
    k = m.ksize
    header = ["t"] + tensor_labels(m.dim)
    if args.method == "prony":
        vals = G_trace_prony(build_prony(m, cfg.tolerance("commute", COMMUTE_TOL)), times)
        disc = None
    else:
        vals = G_trace(ev, times)
        disc = None
        if args.method == "both":
            other = G_trace_prony(build_prony(m, cfg.tolerance("commute", COMMUTE_TOL)), times)
            scale = max(np.linalg.norm(vals, axis=(1, 2)).max(), np.finfo(float).tiny)
            disc = np.linalg.norm(vals - other, axis=(1, 2)) / scale
            header.append("max_discrepancy")
            tol = cfg.tolerance("agreement", 1e-8)
            i = int(np.argmax(disc))
            rep.add("method agreement", bool(disc[i] <= tol), float(disc[i]), f"t={times[i]:.17g}")
    rows = [np.concatenate([[t], v.reshape(k * k)] + ([[d]] if disc is not None else []))
            for t, v, d in zip(times, vals, disc if disc is not None else [None] * len(times))]
    _write(args.out, lambda fh: write_csv(fh, header, rows))
    rep.data["rows"] = len(rows)
    rep.data["method"] = args.method
    return rep


def cmd_prony_export(args, cfg: ModelConfig) -> Report:
    pf = build_prony(cfg.material(), cfg.tolerance("commute", COMMUTE_TOL))
    _write(args.out, lambda fh: write_prony_table(pf, fh))
    rep = Report("prony-export")
    roots = np.concatenate([c.roots for c in pf.channels])
    rep.add("poles real negative", bool(np.all(roots < 0)), float(roots.max()))
    rep.data["channels"] = len(pf.channels)
    rep.data["poles"] = int(roots.size)
    return rep


def _tampered(ev):
    from .relax_exp import eval_G_deriv

    def deriv(t, k):
        g = eval_G_deriv(ev, t, k).kelvin_mat
        return -g if k == 2 else g
    return deriv


def cmd_certificate(args, cfg: ModelConfig) -> Report:
    rep = Report("certificate")
    m, ev = _evaluator(args, cfg)
    a2 = ev.bounds.alpha2
    grid = _grid(args, cfg) if args.tgrid else np.linspace(0.0, 10.0 / a2, 50)
    try:
        cert = decay_certificate(ev, grid, cfg.tolerance("certificate", 1e-9),
                                 _tampered(ev) if args.tamper else None)
    except CertificateError as exc:
        rep.add("certificate", False, 1.0, f"t={exc.t:.17g}", f"item ({exc.item}): {exc}")
        return rep
    rep.add("certificate", True, cert.max_residual, detail="items (ii)-(v)")
    est = verify_estimates(ev, np.geomspace(1e-3, 10.0 / a2, 20), int(cfg.run.get("j_max", 2)),
                           cfg.tolerance("estimates", 1e-10))
    loc = "" if est.passed else f"t={est.violation[0]:.17g}, order {est.violation[1]}"
    rep.add("derivative bounds", est.passed, est.worst_margin, loc, est.summary())
    payload = {"format": "burgers-relax-certificate", "version": 1, "fingerprint": ev.fingerprint,
               **cert.to_dict()}
    _write(args.out, lambda fh: fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n"))
    rep.data.update({"kappa1": cert.kappa1, "kappa2": cert.kappa2, "kappa3": cert.kappa3,
                     "kappa4": cert.kappa4, "pure_exponential": cert.pure_exponential})
    return rep


def cmd_respond(args, cfg: ModelConfig) -> Report:
    if not args.strain:
        raise ConfigError("respond needs --strain PATH")
    m, ev = _evaluator(args, cfg)
    hist = read_strain_csv(args.strain, m.dim)
    if args.path == "convolution":
        stress = convolve(ev, hist)
    else:
        stress = integrate_internal(m, hist, evaluator=ev).stress
    _write(args.out, lambda fh: write_trace_csv(fh, hist.times, stress, "sigma_", m.dim))
    rep = Report("respond")
    rep.data["rows"] = len(hist.times)
    rep.data["path"] = args.path
    return rep


def _decay_config(cfg: ModelConfig) -> DecayConfig:
    run = cfg.run
    return DecayConfig(
        N=int(run.get("mesh_N", 9)), T=float(run.get("T", 40.0)), h=run.get("h"),
        dirichlet=tuple(run.get("dirichlet", ("left",))), lumped=bool(run.get("lumped", False)),
        freeze_internal=bool(run.get("freeze_internal", False)),
        record_every=int(run.get("record_every", 1)), snapshot_every=int(run.get("snapshot_every", 0)),
    )


def _scaled(m, f):
    from .block_operator import BurgersMaterial

    return BurgersMaterial(m.dim, m.rho, m.C, [e / f for e in m.eta])


def cmd_simulate(args, cfg: ModelConfig) -> Report:
    if cfg.dim != 2:
        raise ConfigError("config field 'dim': simulate supports dim = 2 only")
    dc = _decay_config(cfg)
    mats, boxes = cfg.region_materials()
    groups = region_groups(structured_mesh(dc.N, dc.dirichlet).centroids(), boxes) if boxes else None
    res = run_decay_experiment(mats, dc, groups)
    _write(args.out, lambda fh: write_csv(fh, ["t", "kinetic", "elastic", "stored", "total"], res.trace.rows()))
    if args.snapshots:
        mesh = structured_mesh(dc.N, dc.dirichlet)

        def dump(fh):
            rows = []
            for t, u in res.snapshots:
                for i, (x, y) in enumerate(mesh.nodes):
                    rows.append((t, i, x, y, u[2 * i], u[2 * i + 1]))
            write_csv(fh, ["t", "node", "x", "y", "u1", "u2"], rows)
        _write(args.snapshots, dump)
    rep = Report("simulate")
    rep.add("energy monotone", res.monotone, res.max_increase)
    rep.add("energy ratio", res.ratio <= 1e-3, res.ratio, f"T={dc.T:g}")
    rep.add("negative log-slope", res.slope < 0, res.slope)
    rep.data.update({"slope": res.slope, "ratio": res.ratio, "steps_recorded": len(res.trace.times)})
    scales = cfg.run.get("eta_scales")
    if scales:
        with ThreadPoolExecutor(max_workers=min(max_threads(), len(scales))) as pool:
            runs = list(pool.map(lambda f: run_decay_experiment([_scaled(m, f) for m in mats], dc, groups), scales))
        rep.data["eta_scale_slopes"] = {str(f): r.slope for f, r in zip(scales, runs)}
    return rep


def cmd_compare(args, cfg: ModelConfig) -> Report:
    rep = Report("compare")
    rng = np.random.default_rng(args.seed)
    times = _grid(args, cfg)
    m = cfg.material()
    ok, _, _ = _commuting(cfg)
    tol = cfg.tolerance("agreement", 1e-8)

    def agreement(mat):
        a = G_trace(build_evaluator(mat), times)
        b = G_trace_prony(build_prony(mat), times)
        d = np.linalg.norm(a - b, axis=(1, 2)) / max(np.linalg.norm(a, axis=(1, 2)).max(), np.finfo(float).tiny)
        i = int(np.argmax(d))
        return float(d[i]), float(times[i])

    if ok:
        d, t = agreement(m)
        rep.add("method agreement (config)", d <= tol, d, f"t={t:.17g}")
    else:
        rep.data["config"] = "non-commuting: exponential route only"

    mats = [random_material(rng) for _ in range(args.samples)]
    comm = [random_commuting_material(rng) for _ in range(args.samples)]
    ys = [BlockVector(rng.standard_normal((mt.n + 1) * mt.ksize), mt.ksize) for mt in mats]

    def props(pair):
        mt, y = pair
        ev = build_evaluator(mt)
        est = verify_estimates(ev, np.geomspace(1e-3, 10.0 / ev.bounds.alpha2, 20), 2)
        return quadratic_identity_residual(mt, y), est

    with ThreadPoolExecutor(max_workers=max_threads()) as pool:
        out = list(pool.map(props, zip(mats, ys)))
        agr = list(pool.map(agreement, comm))
    q = [r for r, _ in out]
    iq = int(np.argmax(q))
    rep.add("quadratic identity", q[iq] <= 1e-12, q[iq], f"sample {iq}")
    bad = [i for i, (_, e) in enumerate(out) if not e.passed]
    rep.add("derivative bounds", not bad, max(e.worst_margin for _, e in out),
            f"sample {bad[0]}" if bad else "")
    ia = int(np.argmax([d for d, _ in agr]))
    rep.add("method agreement (random commuting)", agr[ia][0] <= tol, agr[ia][0],
            f"sample {ia}, t={agr[ia][1]:.17g}")
    rep.data["samples"] = args.samples
    rep.data["seed"] = args.seed
    return rep


COMMANDS = {
    "validate": cmd_validate,
    "relax": cmd_relax,
    "prony-export": cmd_prony_export,
    "certificate": cmd_certificate,
    "respond": cmd_respond,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}

DEFAULT_OUT = {"relax": "relax.csv", "prony-export": "prony.txt", "certificate": "certificate.json",
               "respond": "stress.csv", "simulate": "energy.csv"}


def _write(path, writer) -> None:
    if path == "-":
        writer(sys.stdout)
        return
    with open(path, "w", newline="") as fh:
        writer(fh)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=PROG, description="Relaxation tensors of the extended Burgers model.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON model configuration")
    p.add_argument("--out", help="output file ('-' for stdout)")
    p.add_argument("--method", choices=["exp", "prony", "both"], default="exp")
    p.add_argument("--tgrid", help="time grid start:stop:count[:log]")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    p.add_argument("--samples", type=int, default=20, help="random materials per suite (compare)")
    p.add_argument("--strain", help="strain history CSV (respond)")
    p.add_argument("--path", choices=["ode", "convolution"], default="ode", help="stress route (respond)")
    p.add_argument("--snapshots", help="displacement snapshot CSV (simulate)")
    p.add_argument("--evaluator", help="cached evaluator file, reused when the material matches")
    p.add_argument("--voigt", action="store_true", help="read 'kelvin' matrices as engineering Voigt")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--report", help="also write the JSON report to this file")
    p.add_argument("--tamper", action="store_true", help=argparse.SUPPRESS)
    return p


def _fail(kind: str, msg: str, code: int) -> int:
    text = " ".join(str(msg).split())
    print(f"{PROG}: error[{kind}]: {text}", file=sys.stderr)
    return code


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail("usage", "invalid command line (see --help)", EXIT_INPUT)
    if args.out is None:
        args.out = DEFAULT_OUT.get(args.command)
    try:
        cfg = load_config(args.config, "voigt" if args.voigt else None)
        report = COMMANDS[args.command](args, cfg)
    except FileNotFoundError as exc:
        return _fail("io", f"{exc.filename}: no such file", EXIT_INPUT)
    except OSError as exc:
        return _fail("io", exc, EXIT_INPUT)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_INPUT)
    except (MaterialError, TensorError) as exc:
        return _fail("material", exc, EXIT_INPUT)
    except HistoryError as exc:
        return _fail("history", exc, EXIT_INPUT)
    except MeshError as exc:
        return _fail("mesh", exc, EXIT_INPUT)
    except NonCommutingError as exc:
        return _fail("non-commuting", f"{exc}; prony route unavailable", EXIT_INPUT)
    except (ConditioningError, np.linalg.LinAlgError) as exc:
        return _fail("numeric", exc, EXIT_NUMERIC)
    except ValueError as exc:
        return _fail("value", exc, EXIT_INPUT)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True) if args.json else report.to_text())
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if not report.passed:
        failed = next(s for s in report.suites if not s.passed)
        where = f" at {failed.location}" if failed.location else ""
        return _fail("check", f"{failed.name} failed{where}: {failed.detail}", EXIT_FAIL)
    return 0


if __name__ == "__main__":
    sys.exit(main())
