"""Command-line pipeline: stability gate, certificate learning, region estimation.

Exit codes: 0 success, 2 scenario parse error, 3 unstable equilibrium,
4 learning failure, 5 region-estimation failure.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from .baseline import monte_carlo_volumes, quadratic_region, solve_lyapunov_equation
from .errors import LearnFailure, NoCriticalPoints, ScenarioError
from .lyapunov_net import Certificate
from .linear_analysis import is_asymptotically_stable, jacobian
from .falsifier import learn_function
from .region import sr_est, write_level_set_csv
from .sampling import uniform_ball
from .scenario import load_scenario
from .simulator import (
    Trajectory,
    converged,
    default_time_grid,
    integrate,
    write_trajectory_csv,
)

EXIT_PARSE = 2
EXIT_UNSTABLE = 3
EXIT_LEARN = 4
EXIT_ESTIMATE = 5


def _load(path):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PARSE)


def _report_header(scenario):
    return {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "hyperparameters": scenario.hyperparameters,
    }


def _stability(scenario):
    A = jacobian(scenario.system.dynamics, scenario.system.m)
    stable, eigs = is_asymptotically_stable(A, margin=scenario.stability_margin)
    return A, stable, eigs


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
    click.echo(f"wrote {path}")


@click.group()
@click.option("--deterministic", is_flag=True, default=False,
              help="Force fixed reduction orders (all stages are sequential and "
                   "seeded, so runs are reproducible either way).")
@click.pass_context
def main(ctx, deterministic):
    ctx.ensure_object(dict)
    ctx.obj["deterministic"] = deterministic


@main.command("check-stability")
@click.argument("scenario_path", type=click.Path(exists=True))
def check_stability(scenario_path):
    """Linearize around the origin and report the eigenvalue verdict."""
    scenario = _load(scenario_path)
    _, stable, eigs = _stability(scenario)
    for lam in sorted(eigs, key=lambda z: z.real):
        click.echo(f"eigenvalue: {lam.real:+.6e} {lam.imag:+.6e}j")
    click.echo(f"verdict: {'asymptotically stable' if stable else 'NOT stable'}")
    if not stable:
        sys.exit(EXIT_UNSTABLE)


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("-o", "--output", default="certificate.json", show_default=True)
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
def learn(scenario_path, output, seed):
    """Run the learner/falsifier loop and save the certificate."""
    scenario = _load(scenario_path)
    _, stable, eigs = _stability(scenario)
    if not stable:
        click.echo("equilibrium is not asymptotically stable; request for tuning "
                   "the interface parameters", err=True)
        sys.exit(EXIT_UNSTABLE)
    train_cfg = scenario.train_cfg
    if seed is not None:
        from dataclasses import replace
        train_cfg = replace(train_cfg, seed=seed)
    try:
        cert = learn_function(scenario.system, train_cfg, scenario.fals_cfg,
                              scenario.n_i)
    except LearnFailure as exc:
        click.echo(f"learning failed: {exc}", err=True)
        sys.exit(EXIT_LEARN)
    cert.save(output)
    click.echo(f"certificate learned in {cert.audit['updates']} updates "
               f"({cert.audit['rounds']} rounds, "
               f"{cert.audit['final_samples']} samples); wrote {output}")


@main.command("estimate-region")
@click.argument("certificate_path", type=click.Path(exists=True))
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("-o", "--output", default="region.json", show_default=True)
@click.option("--level-set-csv", default=None,
              help="Also write a 2-D level-set slice CSV to this path.")
@click.option("--slice-dims", default="0,1", show_default=True)
def estimate_region(certificate_path, scenario_path, output, level_set_csv,
                    slice_dims):
    """Maximize the security region for a saved certificate."""
    scenario = _load(scenario_path)
    cert = Certificate.load(certificate_path)
    try:
        region = sr_est(cert, n_sr=scenario.n_sr, seed=scenario.seed)
    except NoCriticalPoints as exc:
        click.echo(f"estimation failed: {exc}", err=True)
        sys.exit(EXIT_ESTIMATE)
    payload = _report_header(scenario)
    payload.update({
        "method": "neural",
        "u": region.u,
        "d_star": region.d_star,
        "touch_points": [x.tolist() for x in region.touch_points],
        "critical_points": [
            {"x": x.tolist(), "V": v} for x, v in region.critical_set
        ],
        "multistart": region.stats,
    })
    _write_json(output, payload)
    click.echo(f"d* = {region.d_star:.6f} over {region.stats['distinct']} "
               f"critical points")
    if level_set_csv:
        dims = tuple(int(d) for d in slice_dims.split(","))
        fixed = {}
        if region.touch_points:
            tp = region.touch_points[0]
            fixed = {k: float(tp[k]) for k in range(len(tp)) if k not in dims}
        write_level_set_csv(level_set_csv, cert, region.d_star, region.u,
                            dims=dims, fixed=fixed)
        click.echo(f"wrote {level_set_csv}")


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--x0", default=None,
              help="Comma-separated initial state; defaults to the scenario's "
                   "initial_condition.")
@click.option("-o", "--output", default="trajectory.csv", show_default=True)
def simulate(scenario_path, x0, output):
    """Integrate the nonlinear dynamics and write a trajectory CSV."""
    scenario = _load(scenario_path)
    system = scenario.system
    if x0 is not None:
        x0 = np.array([float(v) for v in x0.split(",")])
    elif scenario.initial_condition is not None:
        x0 = scenario.initial_condition
    else:
        click.echo("error: no initial condition given", err=True)
        sys.exit(EXIT_PARSE)
    T, dt = default_time_grid(system)
    T = scenario.sim_T or T
    dt = scenario.sim_dt or dt
    traj = integrate(system, x0, T, dt)
    write_trajectory_csv(output, traj, system.state_names)
    conv = converged(traj, eps=scenario.sim_eps)
    click.echo(f"simulated {T:.1f} s at dt={dt:.4g}; final |x| = "
               f"{traj.final_norm:.3e}; converged: {conv}")
    click.echo(f"wrote {output}")


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("-o", "--outdir", default="out", show_default=True)
def run(scenario_path, outdir):
    """Full pipeline: stability gate, learning, region estimation, reports."""
    scenario = _load(scenario_path)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    system = scenario.system

    _, stable, eigs = _stability(scenario)
    eig_list = [[lam.real, lam.imag] for lam in eigs]
    if not stable:
        click.echo("equilibrium is not asymptotically stable; request for tuning "
                   "the interface parameters", err=True)
        for lam in eigs:
            click.echo(f"  eigenvalue {lam.real:+.6e} {lam.imag:+.6e}j", err=True)
        sys.exit(EXIT_UNSTABLE)
    click.echo("stability gate: passed")

    try:
        cert = learn_function(system, scenario.train_cfg, scenario.fals_cfg,
                              scenario.n_i)
    except LearnFailure as exc:
        click.echo(f"learning failed: {exc}", err=True)
        click.echo("request for tuning user-defined parameters "
                   "(decrease u, change the seed, or adjust alpha/beta/gamma)",
                   err=True)
        sys.exit(EXIT_LEARN)
    cert_path = outdir / "certificate.json"
    cert.save(cert_path)
    click.echo(f"certificate learned in {cert.audit['updates']} updates; "
               f"wrote {cert_path}")

    try:
        region = sr_est(cert, n_sr=scenario.n_sr, seed=scenario.seed)
    except NoCriticalPoints as exc:
        click.echo(f"estimation failed: {exc}", err=True)
        sys.exit(EXIT_ESTIMATE)
    click.echo(f"security region: u = {region.u}, d* = {region.d_star:.6f}")

    payload = _report_header(scenario)
    payload.update({
        "eigenvalues": eig_list,
        "stable": True,
        "method": "neural",
        "u": region.u,
        "d_star": region.d_star,
        "touch_points": [x.tolist() for x in region.touch_points],
        "critical_points": [{"x": x.tolist(), "V": v}
                            for x, v in region.critical_set],
        "multistart": region.stats,
        "learning_audit": cert.audit,
    })
    if scenario.initial_condition is not None:
        x0 = scenario.initial_condition
        inside = region.contains(x0)
        payload["initial_condition"] = {
            "x0": x0.tolist(),
            "V": cert.value(x0),
            "inside_region": inside,
        }
        click.echo(f"x(0) membership: V(x0) = {cert.value(x0):.4f} "
                   f"{'<' if inside else '>='} d* = {region.d_star:.4f} -> "
                   f"{'inside' if inside else 'outside'}")
    _write_json(outdir / "region.json", payload)

    if system.m >= 2:
        dims = (0, 1)
        fixed = {}
        if region.touch_points and system.m > 2:
            tp = region.touch_points[0]
            fixed = {k: float(tp[k]) for k in range(system.m) if k not in dims}
        write_level_set_csv(outdir / "level_set.csv", cert, region.d_star,
                            region.u, dims=dims, fixed=fixed)
        click.echo(f"wrote {outdir / 'level_set.csv'}")


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--certificate", "certificate_path", default=None,
              help="Reuse a saved certificate instead of learning one.")
@click.option("-o", "--output", default="comparison.json", show_default=True)
@click.option("--mc-samples", default=100_000, show_default=True)
def compare(scenario_path, certificate_path, output, mc_samples):
    """Neural region vs the quadratic-Lyapunov baseline (MC volumes)."""
    scenario = _load(scenario_path)
    system = scenario.system
    A, stable, _ = _stability(scenario)
    if not stable:
        click.echo("equilibrium is not asymptotically stable", err=True)
        sys.exit(EXIT_UNSTABLE)
    if certificate_path:
        cert = Certificate.load(certificate_path)
    else:
        try:
            cert = learn_function(system, scenario.train_cfg, scenario.fals_cfg,
                                  scenario.n_i)
        except LearnFailure as exc:
            click.echo(f"learning failed: {exc}", err=True)
            sys.exit(EXIT_LEARN)
    try:
        region = sr_est(cert, n_sr=scenario.n_sr, seed=scenario.seed)
    except NoCriticalPoints as exc:
        click.echo(f"estimation failed: {exc}", err=True)
        sys.exit(EXIT_ESTIMATE)

    P = solve_lyapunov_equation(A)
    quad = quadratic_region(system, P, scenario.fals_cfg)
    volumes = monte_carlo_volumes(region, quad, n_samples=mc_samples,
                                  seed=scenario.seed)
    payload = _report_header(scenario)
    payload.update({
        "neural": {"u": region.u, "d_star": region.d_star},
        "conventional": {"u_q": quad.u_q, "d_q": quad.d_q, "capped": quad.capped,
                         "P": quad.P.tolist()},
        "volumes": volumes,
    })
    _write_json(output, payload)
    click.echo(f"volume ratio neural/quadratic = {volumes['ratio']:.3f}")


@main.command("validate-region")
@click.argument("certificate_path", type=click.Path(exists=True))
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--trajectories", default=100, show_default=True)
@click.option("--mc-samples", default=10_000, show_default=True)
def validate_region(certificate_path, scenario_path, trajectories, mc_samples):
    """Monte-Carlo plus trajectory audit of a saved certificate's region."""
    scenario = _load(scenario_path)
    system = scenario.system
    cert = Certificate.load(certificate_path)
    try:
        region = sr_est(cert, n_sr=scenario.n_sr, seed=scenario.seed)
    except NoCriticalPoints as exc:
        click.echo(f"estimation failed: {exc}", err=True)
        sys.exit(EXIT_ESTIMATE)

    rng = np.random.default_rng(scenario.seed)
    pts = uniform_ball(rng, system.m, region.u, mc_samples)
    inside = [x for x in pts if region.contains(x)]
    click.echo(f"membership audit: {len(inside)}/{mc_samples} ball samples "
               f"inside the region")

    T, dt = default_time_grid(system)
    T = scenario.sim_T or T
    dt = scenario.sim_dt or dt
    stays = conv = 0
    checked = inside[:trajectories]
    for x0 in checked:
        traj = integrate(system, x0, T, dt)
        if all(region.contains(x) for x in traj.states):
            stays += 1
        if converged(traj, eps=scenario.sim_eps):
            conv += 1
    click.echo(f"trajectory audit: {stays}/{len(checked)} stayed inside, "
               f"{conv}/{len(checked)} converged")
    if stays < len(checked) or conv < len(checked):
        click.echo("validation FAILED", err=True)
        sys.exit(EXIT_ESTIMATE)
    click.echo("validation passed")


if __name__ == "__main__":
    main()
