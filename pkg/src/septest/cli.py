"""Command-line entry point.

Subcommands: test, singlet-test, nearest-sep, kext, reduce, verify, bounds,
report.  JSON is the canonical output (stdout or --out); --format csv emits
a flattened projection, and the report path also renders a matplotlib
figure next to the delimited output unless --no-figures is given.

Exit codes: 0 success, 1 computation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import reports
from .circuits import Circuit, CircuitError, parse_circuit, serialize_circuit
from .locc import (
    locc_sep_bound,
    max_entangled_trace_gap,
    singlet_test_analytic,
    singlet_test_mc,
)
from .overlap_tests import (
    permutation_test_circuit_prob,
    permutation_test_prob,
    product_test_circuit_prob,
    product_test_prob,
    swap_test_prob,
)
from .protocols import (
    adversarial_probe,
    honest_sqg_yes_state,
    qma2_verifier,
    qma_sep_verifier,
    sqg_round,
)
from .reductions import (
    PromiseInstance,
    product_to_similarity,
    reduce_bqp,
    reduce_qma,
    reduce_qma2,
    reduce_qszk,
)
from .separability import (
    choose_k,
    k_ext_feasible,
    kext_sep_locc_bound,
    nearest_separable,
    sqg_extension_order,
)
from .states import (
    Cut,
    DensityMatrix,
    PureState,
    helstrom,
    set_dim_caps,
    set_tolerance,
    state_from_json,
)


class UsageError(ValueError):
    pass


def _parse_cut(text: str) -> Cut:
    try:
        groups = tuple(tuple(int(x) for x in part.split(",")) for part in text.split("|"))
        return Cut(groups)
    except Exception as exc:
        raise UsageError(f"bad --cut {text!r} (expected e.g. '0,1|2,3'): {exc}") from exc


def _load_state(path: str):
    with open(path) as fh:
        return state_from_json(fh.read())


def _load_circuit(path: str) -> Circuit:
    with open(path) as fh:
        return parse_circuit(fh.read())


def _as_density(state) -> DensityMatrix:
    return state.to_density() if isinstance(state, PureState) else state


def _emit(payload: dict, args) -> None:
    text = json.dumps(payload, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _seed_of(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    seed = int.from_bytes(os.urandom(8), "big") % 2**63
    print(f"# seed (from entropy): {seed}", file=sys.stderr)
    return seed


def cmd_test(args) -> dict:
    method = args.method
    if args.kind == "swap":
        if len(args.state) != 2:
            raise UsageError("swap test needs two --state files")
        a, b = (_load_state(p) for p in args.state)
        if not isinstance(a, PureState) or not isinstance(b, PureState):
            raise UsageError("swap test expects pure states")
        return {"probability": swap_test_prob(a, b), "method": "analytic"}
    if args.kind == "perm":
        rho = _as_density(_load_state(args.state[0]))
        regs = [int(x) for x in args.regs.split(",")] if args.regs else list(range(rho.layout.n_registers))
        if method == "circuit":
            d = rho.layout.dims[regs[0]]
            value = permutation_test_circuit_prob(rho, len(regs), d)
        else:
            value, _ = permutation_test_prob(rho, regs)
        return {"probability": value, "method": method}
    if args.kind == "product":
        psi = _load_state(args.state[0])
        if not isinstance(psi, PureState):
            raise UsageError("product test expects a pure state")
        cut = _parse_cut(args.cut)
        if method == "circuit":
            value = product_test_circuit_prob(psi, cut)
        else:
            value = product_test_prob(psi, cut)
        return {"probability": value, "method": method}
    raise UsageError(f"unknown test kind {args.kind!r}")


def cmd_singlet_test(args) -> dict:
    rho = _as_density(_load_state(args.state))
    if rho.layout.n_registers != 2 * args.n:
        raise UsageError(f"state must live on {2*args.n} qubit registers (A block then B block)")
    seed = _seed_of(args)
    analytic = singlet_test_analytic(rho)
    out = {"analytic": analytic, "n": args.n, "seed": seed}
    if args.trials:
        mc = singlet_test_mc(rho, args.trials, seed=seed)
        out.update({"mc_frequency": mc.frequency, "trials": mc.trials})
    return out


def cmd_nearest_sep(args) -> dict:
    rho = _as_density(_load_state(args.state))
    cut = _parse_cut(args.cut)
    seed = _seed_of(args)
    ens, dist = nearest_separable(
        rho, cut, ensemble_size=args.ensemble_size, restarts=args.restarts, iters=args.iters, seed=seed
    )
    return {
        "distance_upper": dist,
        "ensemble": {
            "weights": ens.weights.tolist(),
            "factors": [[[f.real.tolist(), f.imag.tolist()] for f in fs] for fs in ens.factors],
            "party_dims": list(ens.party_dims),
        },
        "iterations": args.iters,
        "restarts": args.restarts,
        "seed": seed,
    }


def cmd_kext(args) -> dict:
    rho = _as_density(_load_state(args.state))
    cut = _parse_cut(args.cut)
    feasible, residual, ext = k_ext_feasible(rho, cut, args.k, iters=args.iters)
    out = {"feasible": feasible, "residual": residual, "k": args.k}
    if ext is not None and args.emit_extension:
        out["extension"] = json.loads(ext.to_json())
    return out


def cmd_reduce(args) -> dict:
    n = args.n
    if args.kind == "prod2sim":
        prep = _load_circuit(args.infile)
        cut = _parse_cut(args.cut)
        c0, c1 = product_to_similarity(prep, cut)
        payload = {
            "kind": "prod2sim",
            "circuit0": serialize_circuit(c0),
            "circuit1": serialize_circuit(c1),
        }
        return payload
    if args.kind == "qszk":
        if not args.infile2:
            raise UsageError("qszk reduction needs --in and --in2 prep circuits")
        inst = reduce_qszk(_load_circuit(args.infile), _load_circuit(args.infile2), n, args.delta)
    elif args.kind == "bqp":
        inst = reduce_bqp(_load_circuit(args.infile), n, args.delta)
    elif args.kind == "qma":
        inst = reduce_qma(_load_circuit(args.infile), n, args.delta)
    elif args.kind == "qma2":
        inst = reduce_qma2(_load_circuit(args.infile), n, args.delta)
    else:
        raise UsageError(f"unknown reduction kind {args.kind!r}")
    return instance_to_json(inst)


def instance_to_json(inst: PromiseInstance) -> dict:
    return {
        "circuit": serialize_circuit(inst.circuit),
        "cut": [list(g) for g in inst.cut.groups],
        "norm_kind": inst.norm_kind,
        "alpha": inst.alpha,
        "beta": inst.beta,
        "tag": inst.tag,
        "meta": inst.meta,
    }


def instance_from_json(obj: dict) -> PromiseInstance:
    return PromiseInstance(
        circuit=parse_circuit(obj["circuit"]),
        cut=Cut(tuple(tuple(g) for g in obj["cut"])),
        norm_kind=obj["norm_kind"],
        alpha=obj["alpha"],
        beta=obj["beta"],
        tag=obj["tag"],
        meta=obj.get("meta", {}),
    )


def cmd_verify(args) -> dict:
    with open(args.instance) as fh:
        inst = instance_from_json(json.load(fh))
    seed = _seed_of(args)
    k = args.k
    if args.protocol == "qma":
        if args.prover == "probe":
            value = adversarial_probe("qma", u=inst.circuit, k=k, cut=inst.cut)
            return {"protocol": "qma", "prover": "probe", "acceptance": value, "k": k, "seed": seed}
        if not args.witness:
            raise UsageError("honest qma verification needs --witness")
        wit = _as_density(_load_state(args.witness))
        out = qma_sep_verifier(inst.circuit, wit, k, inst.cut)
        return {"protocol": "qma", "prover": "honest", "acceptance": out.probability, "k": k, "seed": seed}
    if args.protocol == "qma2":
        if args.prover == "probe":
            value = adversarial_probe("qma2", u=inst.circuit, cut=inst.cut, seed=seed)
            return {"protocol": "qma2", "prover": "probe", "acceptance": value, "seed": seed}
        if not args.witness or not args.claim:
            raise UsageError("honest qma2 verification needs --witness and --claim (repeatable)")
        psi = _load_state(args.witness)
        claims = [_load_state(c) for c in args.claim]
        out = qma2_verifier(inst.circuit, psi, (inst.cut, claims))
        return {"protocol": "qma2", "prover": "honest", "acceptance": out.probability, "seed": seed}
    if args.protocol == "sqg":
        rho = inst.circuit.run_mixed()
        grouped_cut = inst.cut
        if args.prover == "probe":
            ens, dist = nearest_separable(rho, grouped_cut, restarts=4, iters=40, seed=seed)
            hel, _ = helstrom(rho, ens.state())
            value = adversarial_probe("sqg", rho=rho, no_meas=hel, k=k, cut=grouped_cut)
            return {"protocol": "sqg", "prover": "probe", "acceptance": value, "k": k, "seed": seed}
        ens, dist = nearest_separable(rho, grouped_cut, restarts=4, iters=40, seed=seed)
        yes = honest_sqg_yes_state(ens, k)
        hel, _ = helstrom(rho, ens.state())
        out = sqg_round(rho, yes, hel, k, cut=grouped_cut)
        return {
            "protocol": "sqg",
            "prover": "honest",
            "acceptance": out.probability,
            "alpha_upper": dist,
            "floor": 0.5 - dist / 4,
            "k": k,
            "seed": seed,
        }
    raise UsageError(f"unknown protocol {args.protocol!r}")


def cmd_bounds(args) -> dict:
    rows = []
    for n in range(1, args.n + 1):
        rows.append(
            {
                "n": n,
                "locc_sep_bound": locc_sep_bound(n),
                "trace_gap": max_entangled_trace_gap(n),
            }
        )
    payload: dict = {"singlet_test": rows}
    if args.l and args.D:
        entry: dict = {"l": args.l, "D": args.D}
        if args.eps is not None:
            entry["choose_k"] = choose_k(args.l, args.D, args.eps, args.delta)
        if args.k:
            entry["kext_sep_locc_bound"] = kext_sep_locc_bound(args.l, args.D, args.k)
        if args.alpha is not None and args.beta is not None:
            entry["sqg_extension_order"] = sqg_extension_order(args.l, args.D, args.alpha, args.beta)
        payload["extension"] = entry
    return payload


def cmd_report(args) -> dict:
    seed = _seed_of(args)
    report = reports.run_suite(args.suite, seed)
    payload = report.to_dict()
    if args.out:
        if args.format == "csv":
            with open(args.out, "w") as fh:
                fh.write(report.to_csv())
        else:
            with open(args.out, "w") as fh:
                fh.write(report.to_json() + "\n")
        if not args.no_figures:
            figdir = args.figdir or os.path.dirname(os.path.abspath(args.out))
            os.makedirs(figdir, exist_ok=True)
            stem = os.path.splitext(os.path.basename(args.out))[0]
            fig_path = os.path.join(figdir, f"{stem}_{args.suite}.png")
            reports.render_figure(report, fig_path)
            payload["figure"] = fig_path
        print(json.dumps({"passed": payload["passed"], "out": args.out, "figure": payload.get("figure")}))
    elif args.figdir and not args.no_figures:
        os.makedirs(args.figdir, exist_ok=True)
        fig_path = os.path.join(args.figdir, f"report_{args.suite}.png")
        reports.render_figure(report, fig_path)
        payload["figure"] = fig_path
        print(report.to_csv() if args.format == "csv" else json.dumps(payload, indent=2))
    else:
        print(report.to_csv() if args.format == "csv" else json.dumps(payload, indent=2))
    return payload


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed; echoed when drawn from entropy")
    common.add_argument("--out", default=None, help="write the result to this file instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tol", type=float, default=None, help="override the construction tolerance")
    common.add_argument("--dim-cap", type=int, default=None, help="override the density-matrix dimension cap")

    p = argparse.ArgumentParser(prog="septest", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    t = add_parser("test", help="run a swap/permutation/product test on a state")
    t.add_argument("--kind", choices=("swap", "perm", "product"), required=True)
    t.add_argument("--state", action="append", required=True, help="state JSON file (repeat for swap)")
    t.add_argument("--method", choices=("analytic", "circuit"), default="analytic")
    t.add_argument("--regs", default=None, help="comma-separated register indices (perm)")
    t.add_argument("--cut", default=None, help="party groups like '0|1,2' (product)")
    t.set_defaults(fn=cmd_test)

    s = add_parser("singlet-test", help="paired-Pauli test on an n+n qubit state")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--state", required=True)
    s.add_argument("--trials", type=int, default=0)
    s.set_defaults(fn=cmd_singlet_test)

    ns = add_parser("nearest-sep", help="seesaw upper bound on the distance to separable")
    ns.add_argument("--state", required=True)
    ns.add_argument("--cut", required=True)
    ns.add_argument("--ensemble-size", type=int, default=None)
    ns.add_argument("--restarts", type=int, default=8)
    ns.add_argument("--iters", type=int, default=60)
    ns.set_defaults(fn=cmd_nearest_sep)

    kx = add_parser("kext", help="symmetric-extension feasibility")
    kx.add_argument("--state", required=True)
    kx.add_argument("--cut", required=True)
    kx.add_argument("--k", type=int, required=True)
    kx.add_argument("--iters", type=int, default=2000)
    kx.add_argument("--emit-extension", action="store_true")
    kx.set_defaults(fn=cmd_kext)

    r = add_parser("reduce", help="build a promise instance from circuits")
    r.add_argument("--kind", choices=("bqp", "qma", "qma2", "qszk", "prod2sim"), required=True)
    r.add_argument("--n", type=int, default=1)
    r.add_argument("--delta", type=float, default=0.0)
    r.add_argument("--in", dest="infile", required=True)
    r.add_argument("--in2", dest="infile2", default=None)
    r.add_argument("--cut", default=None, help="party groups (prod2sim)")
    r.set_defaults(fn=cmd_reduce)

    v = add_parser("verify", help="run a protocol on a promise instance")
    v.add_argument("--protocol", choices=("qma", "qma2", "sqg"), required=True)
    v.add_argument("--instance", required=True)
    v.add_argument("--prover", choices=("honest", "probe"), default="probe")
    v.add_argument("--witness", default=None)
    v.add_argument("--claim", action="append", default=None)
    v.add_argument("--k", type=int, default=2)
    v.set_defaults(fn=cmd_verify)

    b = add_parser("bounds", help="closed-form bound tables")
    b.add_argument("--n", type=int, default=3)
    b.add_argument("--l", type=int, default=None)
    b.add_argument("--D", type=int, default=None)
    b.add_argument("--eps", type=float, default=None)
    b.add_argument("--delta", type=float, default=0.0)
    b.add_argument("--k", type=int, default=None)
    b.add_argument("--alpha", type=float, default=None)
    b.add_argument("--beta", type=float, default=None)
    b.set_defaults(fn=cmd_bounds)

    rp = add_parser("report", help="run a named acceptance suite")
    rp.add_argument("--suite", choices=reports.SUITES, required=True)
    rp.add_argument("--figdir", default=None)
    rp.add_argument("--no-figures", action="store_true")
    rp.set_defaults(fn=cmd_report)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if args.dim_cap:
        set_dim_caps(density=args.dim_cap, pure=max(args.dim_cap, 4096))
    if args.tol:
        set_tolerance(args.tol)
    try:
        if args.command == "report":
            cmd_report(args)
        else:
            payload = args.fn(args)
            _emit(payload, args)
        return 0
    except (UsageError,) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    except (OSError, ValueError, CircuitError, KeyError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
