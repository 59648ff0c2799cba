"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage/config/IO error,
3 numerical abort during training.  Every command reads an optional JSON
config file; explicit flags win over config values.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace

import numpy as np

from . import echo_state, observer as obs, serialize, train as training, verify, youla
from .errors import FormatError, NumericalAbortError, RenError
from .model import _fmt, read_sequences, simulate, write_sequences
from .param import construct_contracting, construct_robust
from .types import Dims, IQCSpec, SequenceBatch, init_direct_params


class CliError(Exception):
    """Usage/config problem; maps to exit code 2."""


class Cfg:
    """Layered option lookup: command-line flag, then config file, then default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file: dict = {}
        path = getattr(args, "config", None)
        if path:
            try:
                with open(path) as fh:
                    self.file = json.load(fh)
            except OSError as exc:
                raise CliError(f"cannot read config {path}: {exc}")
            except json.JSONDecodeError as exc:
                raise CliError(f"config {path}: invalid JSON at line {exc.lineno}, column {exc.colno}")
            if not isinstance(self.file, dict):
                raise CliError(f"config {path}: top level must be an object")

    def get(self, name: str, default=None, cast=None):
        val = getattr(self.args, name.replace("-", "_"), None)
        if val is None:
            val = self.file.get(name, default)
        if val is not None and cast is not None:
            try:
                val = cast(val)
            except (TypeError, ValueError):
                raise CliError(f"option {name!r}: cannot interpret {val!r}")
        return val

    def require(self, name: str, cast=None):
        val = self.get(name, None, cast)
        if val is None:
            raise CliError(f"missing required option {name!r} (flag or config)")
        return val


def _iqc_from_cfg(cfg: Cfg, m: int, p: int):
    gamma = cfg.get("gamma", cast=float)
    nu = cfg.get("nu", cast=float)
    rho = cfg.get("rho", cast=float)
    chosen = [x for x in (gamma, nu, rho) if x is not None]
    if len(chosen) > 1:
        raise CliError("choose at most one of gamma / nu / rho")
    if gamma is not None:
        return IQCSpec.lipschitz(gamma, m=m, p=p)
    if nu is not None:
        return IQCSpec.input_passive(nu, m=m)
    if rho is not None:
        return IQCSpec.output_passive(rho, m=m)
    return None


def _check_model(model, tol: float) -> dict:
    checks = [verify.check_contraction_lmi(model, tol=tol, verbose=True)]
    if model.iqc is not None:
        checks.append(verify.check_iqc_lmi(model, tol=tol, verbose=True))
    return {"checks": [c.to_dict() for c in checks], "pass": all(c.passed for c in checks)}


def _emit(report: dict, path) -> None:
    text = json.dumps(report, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_sample(cfg: Cfg) -> int:
    dims = Dims(
        cfg.require("n", int), cfg.require("m", int),
        cfg.require("p", int), cfg.require("q", int),
    )
    kind = cfg.get("kind", "c-aren")
    if kind not in ("c-ren", "c-aren", "r-ren", "r-aren"):
        raise CliError(f"unknown kind {kind!r}")
    acyclic = kind.endswith("aren")
    robust = kind.startswith("r")
    iqc = _iqc_from_cfg(cfg, m=dims.m, p=dims.p)
    if robust and iqc is None:
        raise CliError("robust kinds need one of gamma / nu / rho")
    if not robust and iqc is not None:
        raise CliError("contracting kinds take no IQC parameter")
    theta = init_direct_params(
        dims,
        acyclic=acyclic,
        robust=robust,
        seed=cfg.get("seed", 0, int),
        scale=cfg.get("scale", 1.0, float),
        epsilon=cfg.get("epsilon", 1e-3, float),
        alpha_bar=cfg.get("alpha-bar", 1.0, float),
    )
    activation = cfg.get("activation", "relu")
    model = (
        construct_robust(theta, iqc, activation=activation)
        if robust
        else construct_contracting(theta, activation=activation)
    )
    out = cfg.get("out")
    if out:
        serialize.save_model(model, out)
    params_out = cfg.get("params-out")
    if params_out:
        serialize.save_params(theta, params_out)
    report = _check_model(model, cfg.get("tol", 1e-9, float))
    _emit(report, cfg.get("report-out"))
    return 0 if report["pass"] else 1


def cmd_convert(cfg: Cfg) -> int:
    theta = serialize.load_params(cfg.require("params"))
    n, m, p, q = theta.dims
    iqc = _iqc_from_cfg(cfg, m=m, p=p)
    activation = cfg.get("activation", "relu")
    if iqc is not None:
        model = construct_robust(theta, iqc, activation=activation)
    else:
        model = construct_contracting(theta, activation=activation)
    serialize.save_model(model, cfg.require("out"))
    report = _check_model(model, cfg.get("tol", 1e-9, float))
    _emit(report, cfg.get("report-out"))
    return 0 if report["pass"] else 1


def cmd_verify(cfg: Cfg) -> int:
    model = serialize.load_model(cfg.require("model"))
    report = _check_model(model, cfg.get("tol", 1e-9, float))
    if cfg.get("gamma-lower", False):
        report["gamma_lower"] = verify.estimate_lipschitz_lower(
            model,
            T=cfg.get("horizon", 100, int),
            restarts=cfg.get("restarts", 10, int),
            steps=cfg.get("steps", 200, int),
            seed=cfg.get("seed", 0, int),
        )
    if cfg.get("alpha-hat", False):
        report["alpha_hat"] = verify.empirical_contraction_rate(
            model, trials=cfg.get("trials", 8, int), T=cfg.get("horizon", 100, int),
            seed=cfg.get("seed", 0, int),
        )
    _emit(report, cfg.get("report-out"))
    return 0 if report["pass"] else 1


def cmd_simulate(cfg: Cfg) -> int:
    model = serialize.load_model(cfg.require("model"))
    batch = read_sequences(cfg.require("data"))
    outputs = []
    for u in batch.inputs:
        y, _, _ = simulate(model, u)
        outputs.append(y)
    out_batch = SequenceBatch(inputs=batch.inputs, outputs=outputs)
    write_sequences(cfg.require("out"), out_batch)
    return 0


def cmd_train(cfg: Cfg) -> int:
    resume = cfg.get("resume")
    adam = None
    start_epoch = 0
    if resume:
        ck = serialize.load_checkpoint(resume)
        theta0 = ck["theta"]
        iqc = ck["iqc"]
        activation = ck["activation"]
        start_epoch = ck["epoch"]
        if ck["optimizer"]:
            adam = training.Adam(theta0.num_params)
            adam.load_state(ck["optimizer"])
    else:
        theta0 = serialize.load_params(cfg.require("params"))
        n, m, p, q = theta0.dims
        iqc = _iqc_from_cfg(cfg, m=m, p=p)
        activation = cfg.get("activation", "relu")
    data = read_sequences(cfg.require("data"))
    config = training.TrainConfig(
        epochs=cfg.get("epochs", 100, int),
        learning_rate=cfg.get("learning-rate", 1e-3, float),
        lr_decay=cfg.get("lr-decay", 0.1, float),
        lr_decay_every=cfg.get("lr-decay-every", None, int),
        chunk_length=cfg.get("chunk-length", None, int),
        batch_size=cfg.get("batch-size", 8, int),
        seed=cfg.get("seed", 0, int),
    )
    result = training.fit(
        theta0, data, config, iqc=iqc, activation=activation,
        adam=adam, start_epoch=start_epoch,
    )
    log_out = cfg.get("log-out")
    if log_out:
        with open(log_out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["epoch", "step", "loss", "lr"])
            for row in result.step_log:
                wr.writerow([row[0], row[1], _fmt(row[2]), _fmt(row[3])])
    model = (
        construct_robust(result.theta, iqc, activation=activation)
        if iqc is not None
        else construct_contracting(result.theta, activation=activation)
    )
    model_out = cfg.get("model-out")
    if model_out:
        serialize.save_model(model, model_out)
    ckpt_out = cfg.get("checkpoint-out")
    if ckpt_out:
        serialize.save_checkpoint(
            ckpt_out, result.theta, optimizer_state=result.optimizer_state,
            epoch=result.final_epoch, activation=activation, iqc=iqc,
        )
    report = _check_model(model, cfg.get("tol", 1e-9, float))
    report["final_loss"] = result.loss_history[-1] if result.loss_history else None
    _emit(report, cfg.get("report-out"))
    return 0 if report["pass"] else 1


def cmd_lipschitz(cfg: Cfg) -> int:
    model = serialize.load_model(cfg.require("model"))
    gl = verify.estimate_lipschitz_lower(
        model,
        T=cfg.get("horizon", 100, int),
        restarts=cfg.get("restarts", 10, int),
        steps=cfg.get("steps", 200, int),
        seed=cfg.get("seed", 0, int),
    )
    _emit({"gamma_lower": gl}, cfg.get("report-out"))
    return 0


def cmd_fit_echo(cfg: Cfg) -> int:
    data = read_sequences(cfg.require("data"))
    if data.outputs is None:
        raise CliError("fit-echo needs output columns in the data")
    dims = Dims(
        cfg.require("n", int), data.m, data.p, cfg.require("q", int)
    )
    model = echo_state.sample_contracting(
        dims,
        seed=cfg.get("seed", 0, int),
        scale=cfg.get("scale", 1.0, float),
        acyclic=not cfg.get("full-d11", False),
        activation=cfg.get("activation", "relu"),
    )
    fitted = echo_state.fit_readout(model, data, ridge=cfg.get("ridge", 0.0, float))
    serialize.save_model(fitted, cfg.require("out"))
    report = _check_model(fitted, cfg.get("tol", 1e-9, float))
    _emit(report, cfg.get("report-out"))
    return 0 if report["pass"] else 1


def _pde_config(cfg: Cfg) -> obs.PdeConfig:
    try:
        return obs.PdeConfig(
            n_grid=cfg.get("n-grid", 11, int),
            dz=cfg.get("dz", 4.0, float),
            dt=cfg.get("dt", None, float),
            steps=cfg.get("steps", 20000, int),
            boundary_noise_std=cfg.get("boundary-noise-std", 0.05, float),
            seed=cfg.get("seed", 0, int),
        )
    except ValueError as exc:
        raise CliError(str(exc))


def cmd_observer_train(cfg: Cfg) -> int:
    pde = _pde_config(cfg)
    dataset = obs.generate_snapshots(pde)
    config = training.TrainConfig(
        epochs=cfg.get("epochs", 30, int),
        learning_rate=cfg.get("learning-rate", 5e-3, float),
        batch_size=cfg.get("batch-size", 256, int),
        seed=cfg.get("train-seed", 1, int),
    )
    result = obs.train_observer(
        dataset,
        neurons=cfg.get("neurons", 48, int),
        config=config,
        activation=cfg.get("activation", "relu"),
        init_scale=cfg.get("init-scale", 0.3, float),
        init_seed=cfg.get("init-seed", 0, int),
    )
    serialize.save_model(result.model, cfg.require("out"))
    report = _check_model(result.model, cfg.get("tol", 1e-9, float))
    report.update(
        rho_hat=result.rho_hat,
        alpha_hat=result.alpha_hat,
        error_bound=result.error_bound,
        final_loss=result.loss_history[-1] if result.loss_history else None,
    )
    _emit(report, cfg.get("report-out"))
    return 0 if report["pass"] else 1


def cmd_observer_eval(cfg: Cfg) -> int:
    model = serialize.load_model(cfg.require("model"))
    pde = _pde_config(cfg)
    ev = obs.evaluate_observer(
        model, pde, T=cfg.get("horizon", 2000, int), seed=cfg.get("eval-seed", 123, int)
    )
    heatmap = cfg.get("heatmap-out")
    if heatmap:
        with open(heatmap, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "z", "xi", "xi_hat"])
            T1, N = ev.xi.shape
            for t in range(T1 - 1):
                for i in range(N):
                    wr.writerow([t, _fmt(i * pde.dz), _fmt(ev.xi[t, i]), _fmt(ev.xi_hat[t, i])])
    errors_out = cfg.get("errors-out")
    if errors_out:
        with open(errors_out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "err_observer", "err_free_run"])
            for t in range(len(ev.err_observer)):
                wr.writerow([t, _fmt(ev.err_observer[t]), _fmt(ev.err_free_run[t])])
    tail_obs, tail_free = ev.tail_errors()
    _emit({"tail_error_observer": tail_obs, "tail_error_free_run": tail_free},
          cfg.get("report-out"))
    return 0


def cmd_youla_train(cfg: Cfg) -> int:
    plant = youla.plant_from_tf(cfg.get("rho-pole", 0.8, float), cfg.get("phi", 0.2 * np.pi, float))
    plant.validate()
    W = youla.make_disturbances(
        n_seq=cfg.get("n-seq", 20, int),
        T=cfg.get("horizon", 500, int),
        hold=cfg.get("hold", 50, int),
        magnitude=cfg.get("magnitude", 10.0, float),
        seed=cfg.get("seed", 0, int),
    )
    if cfg.get("linear", False):
        q_model = youla.linear_q(
            cfg.get("n-lin", 25, int), seed=cfg.get("q-seed", 0, int),
            contraction=cfg.get("q-contraction", 0.05, float),
        )
    else:
        q_model = youla.sample_q_echo(
            cfg.get("n-q", 10, int), cfg.get("q-neurons", 60, int),
            seed=cfg.get("q-seed", 0, int),
        )
    basis = youla.basis_responses(plant, q_model, W)
    policy = youla.optimize_policy(
        plant, basis,
        u_max=cfg.get("u-max", 5.0, float),
        l1_reg=cfg.get("l1-reg", 1e-6, float),
    )
    out = cfg.require("out")
    doc = {
        "format_version": serialize.FORMAT_VERSION,
        "type": "youla_policy",
        "plant": {"rho_pole": cfg.get("rho-pole", 0.8, float), "phi": cfg.get("phi", 0.2 * np.pi, float)},
        "u_max": cfg.get("u-max", 5.0, float),
        "theta": policy.theta.tolist(),
        "q_model": serialize.model_to_dict(q_model),
    }
    with open(out, "w") as fh:
        json.dump(doc, fh, allow_nan=False, indent=1)
        fh.write("\n")
    traces = cfg.get("traces-out")
    if traces:
        _write_youla_traces(traces, plant, q_model, policy.theta, W[: cfg.get("trace-seqs", 2, int)])
    _emit(
        {"l1_cost": policy.l1_cost, "max_control": policy.max_control,
         "u_max": cfg.get("u-max", 5.0, float),
         "constraint_ok": policy.max_control <= cfg.get("u-max", 5.0, float) + 1e-6},
        cfg.get("report-out"),
    )
    return 0


def _write_youla_traces(path, plant, q_model, theta, W) -> None:
    controller = youla.assemble_readout(q_model, theta)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["seq_id", "t", "w", "zeta", "u"])
        for j, w in enumerate(W):
            z, u, _ = youla.closed_loop_rollout(plant, controller, w)
            for t in range(w.shape[0]):
                wr.writerow([j, t, _fmt(w[t, 0]), _fmt(z[t, 0]), _fmt(u[t, 0])])


def _load_policy(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read policy {path}: {exc}")
    except json.JSONDecodeError:
        raise FormatError(f"{path}: invalid JSON")
    if not isinstance(doc, dict) or doc.get("type") != "youla_policy":
        raise FormatError(f"{path}: not a policy document")
    plant = youla.plant_from_tf(float(doc["plant"]["rho_pole"]), float(doc["plant"]["phi"]))
    q_model = serialize.model_from_dict(doc["q_model"])
    theta = np.asarray(doc["theta"], dtype=float)
    return plant, q_model, theta, float(doc.get("u_max", 5.0))


def cmd_youla_eval(cfg: Cfg) -> int:
    plant, q_model, theta, u_max = _load_policy(cfg.require("policy"))
    W = youla.make_disturbances(
        n_seq=cfg.get("n-seq", 5, int),
        T=cfg.get("horizon", 500, int),
        hold=cfg.get("hold", 50, int),
        magnitude=cfg.get("magnitude", 10.0, float),
        seed=cfg.get("seed", 42, int),
    )
    controller = youla.assemble_readout(q_model, theta)
    cost = 0.0
    max_u = 0.0
    for w in W:
        z, u, _ = youla.closed_loop_rollout(plant, controller, w)
        cost += float(np.abs(z).sum())
        max_u = max(max_u, float(np.abs(u).max()))
    traces = cfg.get("traces-out")
    if traces:
        _write_youla_traces(traces, plant, q_model, theta, W[: cfg.get("trace-seqs", 2, int)])
    _emit(
        {"l1_cost": cost, "max_control": max_u, "u_max": u_max,
         "constraint_ok": max_u <= u_max + 1e-6},
        cfg.get("report-out"),
    )
    return 0


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file; flags override its keys")
    sp.add_argument("--report-out", help="also write the JSON report here")
    sp.add_argument("--tol", type=float, help="positive-definiteness tolerance")
    sp.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="renkit",
        description="Certified-stable nonlinear state-space models: sampling, "
        "training, verification, and the observer/feedback pipelines.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="draw a random certified model")
    _add_common(sp)
    sp.add_argument("--kind", choices=["c-ren", "c-aren", "r-ren", "r-aren"])
    for flag in ("--n", "--m", "--p", "--q"):
        sp.add_argument(flag, type=int)
    sp.add_argument("--scale", type=float)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--alpha-bar", type=float)
    sp.add_argument("--activation")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--out")
    sp.add_argument("--params-out")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("convert", help="construct an explicit model from saved parameters")
    _add_common(sp)
    sp.add_argument("--params")
    sp.add_argument("--out")
    sp.add_argument("--activation")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--rho", type=float)
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("verify", help="run certificate checks on a saved model")
    _add_common(sp)
    sp.add_argument("--model")
    sp.add_argument("--gamma-lower", action="store_true")
    sp.add_argument("--alpha-hat", action="store_true")
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--trials", type=int)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="roll a model over input sequences")
    _add_common(sp)
    sp.add_argument("--model")
    sp.add_argument("--data")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("train", help="fit parameters to sequence data")
    _add_common(sp)
    sp.add_argument("--params")
    sp.add_argument("--resume")
    sp.add_argument("--data")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--learning-rate", type=float)
    sp.add_argument("--lr-decay", type=float)
    sp.add_argument("--lr-decay-every", type=int)
    sp.add_argument("--chunk-length", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--activation")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--model-out")
    sp.add_argument("--checkpoint-out")
    sp.add_argument("--log-out")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("lipschitz", help="estimate a lower bound on the l2 gain")
    _add_common(sp)
    sp.add_argument("--model")
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--steps", type=int)
    sp.set_defaults(func=cmd_lipschitz)

    sp = sub.add_parser("fit-echo", help="sample fixed dynamics and fit the readout")
    _add_common(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--scale", type=float)
    sp.add_argument("--ridge", type=float)
    sp.add_argument("--full-d11", action="store_true")
    sp.add_argument("--activation")
    sp.add_argument("--data")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fit_echo)

    sp = sub.add_parser("observer-train", help="simulate the diffusion plant and train an observer")
    _add_common(sp)
    sp.add_argument("--n-grid", type=int)
    sp.add_argument("--dz", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--boundary-noise-std", type=float)
    sp.add_argument("--neurons", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--learning-rate", type=float)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--train-seed", type=int)
    sp.add_argument("--init-scale", type=float)
    sp.add_argument("--init-seed", type=int)
    sp.add_argument("--activation")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_observer_train)

    sp = sub.add_parser("observer-eval", help="co-simulate plant, observer and free run")
    _add_common(sp)
    sp.add_argument("--model")
    sp.add_argument("--n-grid", type=int)
    sp.add_argument("--dz", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--boundary-noise-std", type=float)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--eval-seed", type=int)
    sp.add_argument("--heatmap-out")
    sp.add_argument("--errors-out")
    sp.set_defaults(func=cmd_observer_eval)

    sp = sub.add_parser("youla-train", help="optimize an augmentation policy for the benchmark plant")
    _add_common(sp)
    sp.add_argument("--rho-pole", type=float)
    sp.add_argument("--phi", type=float)
    sp.add_argument("--n-seq", type=int)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--hold", type=int)
    sp.add_argument("--magnitude", type=float)
    sp.add_argument("--u-max", type=float)
    sp.add_argument("--l1-reg", type=float)
    sp.add_argument("--linear", action="store_true")
    sp.add_argument("--n-q", type=int)
    sp.add_argument("--q-neurons", type=int)
    sp.add_argument("--n-lin", type=int)
    sp.add_argument("--q-seed", type=int)
    sp.add_argument("--q-contraction", type=float)
    sp.add_argument("--out")
    sp.add_argument("--traces-out")
    sp.add_argument("--trace-seqs", type=int)
    sp.set_defaults(func=cmd_youla_train)

    sp = sub.add_parser("youla-eval", help="evaluate a saved policy on fresh disturbances")
    _add_common(sp)
    sp.add_argument("--policy")
    sp.add_argument("--n-seq", type=int)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--hold", type=int)
    sp.add_argument("--magnitude", type=float)
    sp.add_argument("--traces-out")
    sp.add_argument("--trace-seqs", type=int)
    sp.set_defaults(func=cmd_youla_eval)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = Cfg(args)
        return args.func(cfg)
    except NumericalAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CliError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
