"""Release gate: every shipped guarantee checked end to end.

Each test is one gate with its stated tolerance and runtime cap. The
comparative benchmark gates rerun the full experiments and print the
aggregate curves whichever way the comparison lands, so a failing
ordering claim leaves the evidence in the log instead of hiding it.
The two heaviest gates need multi-core desktop throughput and are
skipped unless MFBO_RUN_HEAVY=1; their skip messages carry measured
single-trial timings from this container.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.stats import norm

from mfbo.acquisition import Incumbent, ei_score, mes_score, pi_score
from mfbo.acquisition_mf import (
    CostSchedule,
    mf_ei_score,
    mf_mes_score,
    mf_pi_score,
    sample_density_discount,
)
from mfbo.benchmarks import lookup, registry, spring_mass_positions
from mfbo.dataset import ObservationSet
from mfbo.engine import ExperimentConfig, config_from_manifest
from mfbo.gp import GpPosterior, KernelParams, fit_gp, kernel_matrix
from mfbo.harness import budget_to_tolerance, run_experiment, verify_registry
from mfbo.metrics import compute_metrics, read_manifest
from mfbo.mfgp import MfGpPosterior, MfKernelParams, _joint_covariance
from mfbo.numerics import RandomStream

RUN_HEAVY = os.environ.get("MFBO_RUN_HEAVY") == "1"

HEAVY_SKIP = (
    "needs multi-core desktop throughput: four configurations x 10 trials "
    "at the full budget; on this single-core container one probe trial at "
    "one tenth of the budget took 2.8 s (ei) and 146 s (mfei) on the 5-D "
    "surrogate loop and per-step cost grows superlinearly with history "
    "size, projecting to hours per sub-gate. Set MFBO_RUN_HEAVY=1 to run."
)


def show_curve(label, curve):
    points = {
        float(curve.budget[i]): round(float(curve.median[i]), 4)
        for i in range(0, len(curve.budget), 20)
    }
    print(f"  {label} median eps_t by budget: {points}")


def crossing(result, tol=0.05):
    return budget_to_tolerance(result.curve, tol=tol)


# --- gate 1: improvement-based score derivatives -------------------------


def test_score_derivatives_match_finite_differences():
    """Analytic mean/std sensitivities of EI and PI vs central FD.

    Ten thousand random posterior states, relative tolerance 1e-5,
    under five seconds.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(418)
    n = 10_000
    mean = rng.normal(0.0, 2.0, n)
    std = rng.uniform(0.05, 3.0, n)
    inc = mean + rng.uniform(-4.0, 4.0, n) * std
    z = (inc - mean) / std

    def fd(score, which):
        h = 1e-6 * std
        if which == "mean":
            hi, lo = score(mean + h, std, inc), score(mean - h, std, inc)
        else:
            hi, lo = score(mean, std + h, inc), score(mean, std - h, inc)
        return (hi - lo) / (2.0 * h)

    def close(got, expect):
        return np.all(np.abs(got - expect) <= 1e-5 * np.maximum(np.abs(expect), 1e-10))

    assert close(fd(ei_score, "mean"), -norm.cdf(z))
    assert close(fd(ei_score, "std"), norm.pdf(z))
    assert close(fd(pi_score, "mean"), -norm.pdf(z) / std)
    assert close(fd(pi_score, "std"), -z * norm.pdf(z) / std)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"derivative sweep took {elapsed:.1f}s"
    print(f"PASS derivative identities at {n} states in {elapsed:.2f}s")


# --- gate 2: single-level collapse of the multifidelity scores -----------


def test_single_level_scores_collapse_to_plain_ones():
    """With one fidelity level the MF scores equal their plain forms.

    mf_ei equals ei and mf_mes equals mes outright; mf_pi equals pi
    times the sample-density factor, which is the only term that
    survives the collapse. Tolerance 1e-10, under ten seconds.
    """
    t0 = time.perf_counter()
    params = MfKernelParams(
        kernels=[KernelParams([0.35], 1.0, 1e-12)], scales=np.empty(0)
    )
    x = np.array([[0.15], [0.4], [0.5], [0.65], [0.85]])
    y = np.array([0.8, -0.1, -0.6, 0.3, 0.2])
    g = MfGpPosterior.from_params(x, np.ones(5, dtype=int), y, params)
    data = ObservationSet(dim=1)
    for xi, yi in zip(x, y):
        data.append(xi, 1, yi)

    inc = Incumbent(location=np.array([0.5]), value=-0.6)
    sched = CostSchedule(costs=(1.0,))
    q = np.linspace(0.0, 1.0, 201)[:, None]
    mu, sd = g.predict_level_batch(q, 1)

    gap_ei = np.max(np.abs(mf_ei_score(g, inc, sched, q, 1) - ei_score(mu, sd, inc.value)))
    draws = np.array([-1.0, -1.5, -0.8])
    gap_mes = np.max(np.abs(mf_mes_score(g, draws, sched, q, 1) - mes_score(mu, sd, draws)))
    density = sample_density_discount(q, x, params.kernels[0].lengthscales)
    gap_pi = np.max(
        np.abs(mf_pi_score(g, inc, sched, data, q, 1) - pi_score(mu, sd, inc.value) * density)
    )
    assert gap_ei < 1e-10
    assert gap_mes < 1e-10
    assert gap_pi < 1e-10
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    print(
        f"PASS single-level collapse: ei gap {gap_ei:.1e}, mes gap {gap_mes:.1e}, "
        f"pi-times-density gap {gap_pi:.1e} in {elapsed:.2f}s"
    )


# --- gate 3: registry self-verification ----------------------------------


def test_registry_records_verify():
    """Every optimum record re-derives; grid oracles report verbatim.

    Published reference values hold within 1e-3; the dense-grid checks
    print their discrepancies rather than folding them away. Under two
    minutes.
    """
    t0 = time.perf_counter()
    results = verify_registry()
    for r in results:
        print(f"  {'ok  ' if r.passed else 'FAIL'} {r.name:16s} {r.detail}")
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]
    assert len(results) == len(registry()) == 11

    assert lookup("forrester").optimum.value == pytest.approx(-6.0207, abs=1e-3)
    for name in ("rosenbrock_d2", "rosenbrock_d5", "rosenbrock_d10"):
        fam = lookup(name)
        assert fam.optimum.value == 0.0
        assert np.array_equal(fam.optimum.location, np.ones(fam.dim))
    sr = lookup("rastrigin_sr")
    assert sr.optimum.value == 0.0
    assert np.allclose(sr.optimum.location, [0.1, 0.1])
    assert lookup("alos_d1").optimum.value == pytest.approx(-0.6250, abs=1e-3)

    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    print(f"PASS registry verification of 11 families in {elapsed:.1f}s")


# --- gate 4: surrogate sanity --------------------------------------------


def test_surrogate_interpolation_recovery_and_joint_psd():
    """Interpolation at 1e-6, hyperparameters back within x2, PSD joint.

    The recovery half draws one noisy 40-point path from a known
    kernel and refits; the joint covariance half stresses random mixed
    level sets.
    """
    x = np.linspace(0.0, 1.0, 7)[:, None]
    y = np.sin(3.0 * x[:, 0]) * 4.0 + 2.0
    params = KernelParams(lengthscales=[0.3], signal_variance=1.0, noise_variance=0.0)
    post = GpPosterior.from_params(x, y, params)
    mu, _ = post.predict_batch(x)
    worst = float(np.max(np.abs(mu - y)))
    assert worst < 1e-6

    gen = KernelParams(lengthscales=[0.1], signal_variance=1.0, noise_variance=0.0)
    stream = RandomStream(104)
    xr = np.sort(stream.uniform(size=(40, 1)), axis=0)
    k = kernel_matrix(gen, xr, xr) + 1e-10 * np.eye(40)
    f = np.linalg.cholesky(k) @ stream.standard_normal(40)
    yr = f + 0.05 * stream.standard_normal(40)
    data = ObservationSet(dim=1)
    for xi, yi in zip(xr, yr):
        data.append(xi, 1, yi)
    fitted = fit_gp(data, RandomStream(7))
    ls = float(fitted.params.lengthscales[0])
    sv = fitted.params.signal_variance * fitted.y_std**2
    nv = fitted.params.noise_variance * fitted.y_std**2
    assert 0.05 <= ls <= 0.2, f"lengthscale {ls} outside x2 band of 0.1"
    assert 0.5 <= sv <= 2.0, f"signal variance {sv} outside x2 band of 1.0"
    assert 1.25e-3 <= nv <= 5e-3, f"noise variance {nv} outside x2 band of 2.5e-3"

    stream = RandomStream(31)
    for _ in range(10):
        kernels = [
            KernelParams(
                lengthscales=stream.uniform(0.05, 1.0, size=2),
                signal_variance=float(stream.uniform(0.1, 5.0)),
                noise_variance=0.0,
            )
            for _ in range(3)
        ]
        mfp = MfKernelParams(kernels=kernels, scales=stream.uniform(-2.0, 2.0, size=2))
        xs = stream.uniform(size=(25, 2))
        levels = stream.integers(1, 4, size=25)
        kj = _joint_covariance(mfp, xs, levels)
        eigmin = float(np.min(np.linalg.eigvalsh(kj)))
        assert eigmin > -1e-8 * max(1.0, float(np.max(np.abs(kj))))

    print(
        f"PASS surrogate sanity: interpolation gap {worst:.1e}, recovered "
        f"(ls {ls:.3f}, sv {sv:.3f}, nv {nv:.2e}), 10 joint covariances PSD"
    )


# --- gate 5: integrator convergence order --------------------------------


def test_oscillator_integrator_is_fourth_order():
    """Halving dt shrinks the eigen-oracle error by about 2^4.

    Accepted band 16 +/- 20%, under ten seconds.
    """
    t0 = time.perf_counter()
    m1, m2, k1, k2 = 1.3, 2.1, 2.5, 3.7
    a = np.array([[-(k1 + k2) / m1, k2 / m1], [k2 / m2, -(k1 + k2) / m2]])
    lam, vec = np.linalg.eig(a)
    w = np.sqrt(-lam)
    c0 = np.linalg.solve(vec, np.array([1.0, 0.0]))
    exact = float((vec @ (np.cos(w * 6.0) * c0))[0])

    x = np.array([[m1, m2, k1, k2]])
    e_coarse = abs(float(spring_mass_positions(x, 0.1)[0]) - exact)
    e_fine = abs(float(spring_mass_positions(x, 0.05)[0]) - exact)
    ratio = e_coarse / e_fine
    assert 16.0 * 0.8 <= ratio <= 16.0 * 1.2, f"error ratio {ratio:.2f}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    print(f"PASS integrator order: dt-halving error ratio {ratio:.2f} in {elapsed:.2f}s")


# --- gate 6: comparative benchmark claims at ten seeded trials -----------


def test_forrester_multifidelity_budget_advantage():
    """Four-level MFEI should cross median eps_t <= 0.05 before EI.

    Runs both configurations in full (10 trials, default costs and
    budget) and prints both aggregate curves. With free initial
    designs of 3 reference points (EI) versus 6+6+6+3 mixed points
    (MFEI), the 1-D objective is easy enough that EI converges within
    a query or two, so this ordering is not expected to hold here; the
    curves below carry the evidence either way.
    """
    t0 = time.perf_counter()
    ei_res = run_experiment(ExperimentConfig(benchmark="forrester", acquisition="ei"))
    mf_res = run_experiment(ExperimentConfig(benchmark="forrester", acquisition="mfei"))
    b_ei, b_mf = crossing(ei_res), crossing(mf_res)
    show_curve("ei  ", ei_res.curve)
    show_curve("mfei", mf_res.curve)
    elapsed = time.perf_counter() - t0
    print(f"  crossings: ei at B={b_ei}, mfei at B={b_mf} ({elapsed:.0f}s)")
    assert elapsed < 900.0
    assert b_mf is not None, "mfei never reached eps_t <= 0.05"
    assert b_ei is None or b_mf < b_ei, (
        f"mfei crossed at B={b_mf}, not strictly before ei at B={b_ei}; "
        "curves printed above"
    )
    print(f"PASS multifidelity budget advantage: mfei B={b_mf} < ei B={b_ei}")


def test_forrester_entropy_search_stalls_while_pi_succeeds():
    """MES should miss median eps_t <= 0.05 within budget; PI should hit.

    Runs both configurations in full and prints the curves. A 1-D
    objective with roughly 97 affordable reference queries gives even
    an exploration-heavy sampler ample room to converge, so the
    stall is not expected to reproduce here; the curves below carry
    the evidence either way.
    """
    t0 = time.perf_counter()
    pi_res = run_experiment(ExperimentConfig(benchmark="forrester", acquisition="pi"))
    mes_res = run_experiment(ExperimentConfig(benchmark="forrester", acquisition="mes"))
    b_pi, b_mes = crossing(pi_res), crossing(mes_res)
    show_curve("pi ", pi_res.curve)
    show_curve("mes", mes_res.curve)
    elapsed = time.perf_counter() - t0
    print(f"  crossings: pi at B={b_pi}, mes at B={b_mes} ({elapsed:.0f}s)")
    assert elapsed < 900.0
    assert b_pi is not None, "pi never reached eps_t <= 0.05"
    assert b_mes is None, (
        f"mes reached eps_t <= 0.05 at B={b_mes} instead of stalling; "
        "curves printed above"
    )
    print(f"PASS entropy search stalls while pi crosses at B={b_pi}")


@pytest.mark.skipif(not RUN_HEAVY, reason=HEAVY_SKIP)
def test_rosenbrock5_multifidelity_dominates_at_final_budget():
    """Both improvement-based MF methods end below both SF ones (D=5)."""
    t0 = time.perf_counter()
    finals = {}
    for kind in ("ei", "pi", "mfei", "mfpi"):
        res = run_experiment(
            ExperimentConfig(benchmark="rosenbrock_d5", acquisition=kind)
        )
        finals[kind] = res.final_median
        show_curve(kind.ljust(4), res.curve)
    elapsed = time.perf_counter() - t0
    print(f"  final medians: {finals} ({elapsed:.0f}s)")
    assert max(finals["mfei"], finals["mfpi"]) < min(finals["ei"], finals["pi"]), (
        f"final medians {finals}; curves printed above"
    )
    print("PASS multifidelity dominance at final budget")


@pytest.mark.skipif(not RUN_HEAVY, reason=HEAVY_SKIP)
def test_rosenbrock10_no_method_reaches_tolerance():
    """At D=10 no improvement-based method reaches median eps_t <= 0.05."""
    t0 = time.perf_counter()
    crossings = {}
    for kind in ("ei", "pi", "mfei", "mfpi"):
        res = run_experiment(
            ExperimentConfig(benchmark="rosenbrock_d10", acquisition=kind)
        )
        crossings[kind] = crossing(res)
        show_curve(kind.ljust(4), res.curve)
    elapsed = time.perf_counter() - t0
    print(f"  crossings: {crossings} ({elapsed:.0f}s)")
    assert all(b is None for b in crossings.values()), (
        f"crossings {crossings}; curves printed above"
    )
    print("PASS no method reaches tolerance at D=10")


# --- gate 7: manifest replay ---------------------------------------------


def test_manifest_replay_writes_byte_identical_trials(tmp_path):
    """A run replayed from its manifest reproduces every trial CSV."""
    first = tmp_path / "first"
    second = tmp_path / "second"
    cfg = ExperimentConfig(
        benchmark="forrester", acquisition="mfei", budget=3.0,
        n_initial={1: 4, 2: 4, 3: 4, 4: 3}, trials=3, seed=11,
    )
    run_experiment(cfg, out_dir=first)
    manifest = read_manifest(first / "forrester-mfei-manifest.json")
    replay = config_from_manifest(manifest["configuration"])
    run_experiment(replay, out_dir=second)
    trial_names = sorted(p.name for p in first.iterdir() if "-trial" in p.name)
    assert len(trial_names) == 3
    for name in trial_names:
        assert (second / name).read_bytes() == (first / name).read_bytes(), name
    print(f"PASS manifest replay byte-identical across {len(trial_names)} trials")


# --- gate 8: metric identities -------------------------------------------


def test_emitted_rows_and_optimum_fixed_point(tmp_path):
    """Every emitted row satisfies the rms identity; optima score zero.

    eps_t must equal sqrt((eps_x^2 + eps_f^2)/2) to 1e-12 per CSV row.
    At each recorded optimum the error triple is (0, 0, 0); alos_d1
    publishes its record to four decimals a hair below the achievable
    value, leaving a residual objective gap under 2e-6, which is
    reported here rather than rounded away.
    """
    run_experiment(
        ExperimentConfig(benchmark="forrester", acquisition="ei", budget=5.0, trials=2),
        out_dir=tmp_path,
    )
    rows = 0
    for path in tmp_path.glob("*-trial*.csv"):
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        ix, if_, it = header.index("eps_x"), header.index("eps_f"), header.index("eps_t")
        for line in lines[1:]:
            cells = line.split(",")
            ex, ef, et = float(cells[ix]), float(cells[if_]), float(cells[it])
            assert abs(et - math.sqrt((ex * ex + ef * ef) / 2.0)) <= 1e-12
            rows += 1
    assert rows > 0

    for name, fam in registry().items():
        mp = compute_metrics(fam, fam.optimum.location)
        assert mp.eps_x == 0.0, name
        if name == "alos_d1":
            assert 0.0 < mp.eps_f < 2e-6
            print(f"  note: alos_d1 residual eps_f {mp.eps_f:.2e} from its rounded record")
        else:
            assert mp.eps_f == 0.0, name
            assert mp.eps_t == 0.0, name
    print(f"PASS metric identities on {rows} emitted rows and 11 optima")
