"""End-to-end acceptance checks; each records a one-line PASS/FAIL summary."""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from riskprune.calibration import (
    build_grid,
    calibrate_risks,
    calibrate_segmentation,
    per_sample_losses,
    risk_curve,
)
from riskprune.io import (
    export_sparse,
    import_sparse,
    load_checkpoint,
    read_idx_images,
    read_report_csv,
    save_checkpoint,
    write_report,
)
from riskprune.losses import loss_disagree
from riskprune.network import DenseNetwork, forward
from riskprune.pruning import n_pruned, propagate_dead_neurons, prune
from riskprune.pvalues import PVALUES, binom_cdf, p_binomial, p_hb, p_prw
from riskprune.validation import (
    DEFAULT_U,
    bootstrap_risk,
    logistic_curve,
    simulate_fwer,
    simulate_superuniformity,
    superuniformity_margin,
)


def record(number, name, ok, detail=""):
    ACCEPTANCE_LINES[f"{number} {name}"] = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {name}: {detail}"
    assert ok, detail


def exact_cdf_table(n, p):
    """P(Bin(n, p) <= k) for k = 0..n, summed in integer arithmetic and divided once."""
    a, d = p.as_integer_ratio()
    b = d - a
    den = d**n
    out = np.empty(n + 1)
    term = b**n  # comb(n, 0) a^0 b^n
    acc = 0
    for k in range(n + 1):
        acc += term
        out[k] = acc / den
        if k < n:
            term = term * (n - k) * a // ((k + 1) * b)
    return out


def test_01_binomial_oracle():
    start = time.perf_counter()
    worst = 0.0
    for p in (0.01, 0.1, 0.5, 0.9):
        for n in range(1, 201):
            exact = exact_cdf_table(n, p)
            got = binom_cdf(np.arange(-1, n + 1), n, p)
            assert got[0] == 0.0
            worst = max(worst, float(np.max(np.abs(got[1:] - exact) / exact)))
    elapsed = time.perf_counter() - start
    record(1, "exact binomial oracle", worst <= 1e-12 and elapsed < 10,
           f"worst relative error {worst:.2e} (tol 1e-12), {elapsed:.1f}s")


def test_02_pvalue_spot_values():
    b = p_binomial(10, 0.5, 0.5)
    r = p_prw(10, 0.2, 0.5)
    h = p_hb(100, 0.0, 0.1)
    ok = b == 0.623046875 and abs(r - (4 / 3) * (56 / 1024)) <= 1e-12 and abs(h - 0.9**100) <= 1e-12
    record(2, "p-value spot values", ok, f"binomial {b!r}, prw {r:.10f}, hb {h:.6e}")


def test_03_superuniformity():
    start = time.perf_counter()
    T = 100_000
    worst = -math.inf
    for kind in PVALUES:
        for alpha in (0.05, 0.1):
            cdf = simulate_superuniformity(kind, 50, alpha, T, seed=2024)
            for u in DEFAULT_U:
                worst = max(worst, cdf[u] - (u + superuniformity_margin(u, T)))
    elapsed = time.perf_counter() - start
    record(3, "super-uniformity", worst <= 0 and elapsed < 120,
           f"max excess over u + 3 sigma = {worst:.4f} (must be <= 0), {elapsed:.1f}s")


def test_04_fwer_control():
    start = time.perf_counter()
    bound = 0.1 + 3 * math.sqrt(0.1 * 0.9 / 2000)
    curve = logistic_curve(0.5, 0.05, 0.0, 0.2)  # crosses 0.1 at ratio 0.5
    fs = simulate_fwer(curve, 500, 0.1, 0.1, "binomial", "fixed-sequence", trials=2000, seed=1)
    surface = np.array([1.0, 0.8, 0.6])[:, None] * curve(np.arange(5) / 5 + 0.1)[None, :]
    fb = simulate_fwer(surface, 500, 0.1, 0.1, "binomial", "fallback", trials=2000, seed=1)
    elapsed = time.perf_counter() - start
    ok = fs.violation_rate <= 0.12 and fb.violation_rate <= 0.12 and elapsed < 300
    record(4, "FWER control", ok,
           f"fixed-sequence {fs.violation_rate:.4f}, fallback 3x5 {fb.violation_rate:.4f} "
           f"(bound 0.12, 3-sigma {bound:.4f}), {elapsed:.1f}s")


def test_05_pruning_invariants():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    count_ok = nest_ok = identity_ok = exact_ok = idem_ok = True
    propagated = 0
    for _ in range(50):
        sizes = list(rng.integers(2, 12, size=rng.integers(2, 5)))
        net = DenseNetwork.random(sizes, seed=int(rng.integers(2**31)), scale=1.0)
        ratio = float(rng.uniform(0, 0.99))
        pn = prune(net, ratio)
        zeros = sum(int(np.count_nonzero(m)) for m in pn.mask.zeroed)
        count_ok &= zeros == math.floor(ratio * net.n_weights + 1e-9) == n_pruned(ratio, net.n_weights)

        masks = [prune(net, r).mask.coordinates() for r in build_grid(20)]
        nest_ok &= all(a <= b for a, b in zip(masks, masks[1:]))

        X = rng.normal(size=(100, sizes[0]))
        identity_ok &= forward(prune(net, 0.0).network, X).tobytes() == forward(net, X).tobytes()

        once = propagate_dead_neurons(pn)
        twice = propagate_dead_neurons(once)
        propagated += once.mask.n_zeroed - pn.mask.n_zeroed
        exact_ok &= forward(once.network, X).tobytes() == forward(pn.network, X).tobytes()
        idem_ok &= all(a.weights.tobytes() == b.weights.tobytes() and a.biases.tobytes() == b.biases.tobytes()
                       for a, b in zip(once.network.layers, twice.network.layers))
    elapsed = time.perf_counter() - start
    ok = count_ok and nest_ok and identity_ok and exact_ok and idem_ok and propagated > 0 and elapsed < 30
    record(5, "pruning invariants", ok,
           f"count {count_ok}, nesting {nest_ok}, identity {identity_ok}, propagation exact {exact_ok}, "
           f"idempotent {idem_ok} ({propagated} extra weights removed by propagation), {elapsed:.1f}s")


ALPHAS_LOW = (0.03, 0.04, 0.05)
ALPHAS_HIGH = (0.10, 0.12, 0.15)


@pytest.fixture(scope="module")
def mnist_curves(mnist_split, mnist_net):
    s = mnist_split
    grid = build_grid(100)
    losses = {kind: per_sample_losses(mnist_net, s.X_cal, s.y_cal, kind, grid)
              for kind in ("misclassify", "relaxed", "disagree")}
    return grid, losses


def _selected(grid, values, alpha):
    res = calibrate_risks(values.mean(axis=1), values.shape[1], alpha, 0.1, "binomial", grid)
    return -math.inf if res.selected is None else res.selected


def test_06_loss_dominance(mnist_curves):
    start = time.perf_counter()
    grid, losses = mnist_curves
    pointwise = bool(np.all(losses["relaxed"] <= losses["misclassify"]))
    pairs = {a: (_selected(grid, losses["misclassify"], a), _selected(grid, losses["relaxed"], a))
             for a in ALPHAS_LOW + ALPHAS_HIGH}
    ordered = all(r >= m for m, r in pairs.values())
    nonvacuous = any(m > -math.inf for m, _ in pairs.values())
    elapsed = time.perf_counter() - start
    shown = ", ".join(f"a={a:g}: {m:g}<={r:g}" for a, (m, r) in pairs.items())
    record(6, "loss dominance", pointwise and ordered and nonvacuous and elapsed < 600,
           f"pointwise {pointwise}; selected ratio loss1<=loss2: {shown}")


def test_07_monotone_in_alpha(mnist_curves):
    grid, losses = mnist_curves
    chains = {kind: [_selected(grid, values, a) for a in ALPHAS_LOW + ALPHAS_HIGH]
              for kind, values in losses.items()}
    ok = all(c == sorted(c) for c in chains.values())
    shown = "; ".join(f"{k}: " + " -> ".join(f"{v:g}" for v in c) for k, c in chains.items())
    record(7, "monotone in alpha", ok, f"alpha {ALPHAS_LOW + ALPHAS_HIGH}: {shown}")


def test_08_bootstrap(mnist_split, mnist_net):
    start = time.perf_counter()
    X = mnist_split.X_cal[:1000]
    full = mnist_net.predict(X)
    values = loss_disagree(full, prune(mnist_net, 0.8).network.predict(X))
    a = bootstrap_risk(values, B=10_000, seed=11)
    b = bootstrap_risk(values, B=10_000, seed=11)
    same = a.risks.tobytes() == b.risks.tobytes()
    r = a.point_risk
    se = math.sqrt(r * (1 - r) / values.size) / math.sqrt(a.B)
    close = abs(a.risks.mean() - r) <= 4 * se
    const = bootstrap_risk(np.full(1000, 0.25), B=10_000, seed=11)
    point_mass = bool(np.ptp(const.risks) <= 1e-15 and abs(const.risks[0] - 0.25) <= 1e-15)
    elapsed = time.perf_counter() - start
    ok = same and close and point_mass and 0 < r < 1 and elapsed < 60
    record(8, "bootstrap", ok,
           f"deterministic {same}; point risk {r:.4f}, mean {a.risks.mean():.5f}, 4 SE {4 * se:.5f}; "
           f"constant fixture spread {np.ptp(const.risks):.1e}, {elapsed:.1f}s")


def test_09_iou_calibration():
    start = time.perf_counter()
    n = 465
    full = np.full((n, 5, 5), 0.9)  # dense mask: all 25 pixels
    pruned = {}
    for ratio, lost in ((0.0, 0), (0.5, 1), (0.9, 5)):
        maps = full.copy()
        maps[:, 0, :lost] = 0.1  # drop `lost` pixels: 1 - IoU = lost / 25
        pruned[ratio] = maps
    res = calibrate_segmentation(full, pruned, beta=0.5, alpha=0.05, delta=0.1, pvalue_kind="hb")
    curve_ok = np.allclose(res.risks, [0.0, 0.04, 0.2], atol=1e-12)
    elapsed = time.perf_counter() - start
    ok = curve_ok and res.rejected == [0, 1] and elapsed < 30
    record(9, "IoU calibration", ok,
           f"1-IoU curve {np.round(res.risks, 6).tolist()}, H-B p-values "
           f"{[float(f'{p:.4g}') for p in res.pvalues]}, certified indices {res.rejected} (expected [0, 1])")


def test_10_format_round_trips(tmp_path):
    start = time.perf_counter()
    rng = np.random.default_rng(10)
    net = DenseNetwork.random([784, 64, 32, 10], seed=10)
    save_checkpoint(net, tmp_path / "c.ck", precision=64)
    back = load_checkpoint(tmp_path / "c.ck")
    ck_ok = all(a.weights.tobytes() == b.weights.tobytes() and a.biases.tobytes() == b.biases.tobytes()
                for a, b in zip(net.layers, back.layers))

    pn = prune(net, 0.95)
    export_sparse(pn, tmp_path / "s.sp")
    sp = import_sparse(tmp_path / "s.sp")
    X = rng.random((100, 784))
    sparse_ok = all(a.weights.tobytes() == b.weights.tobytes() for a, b in zip(pn.network.layers, sp.layers))
    sparse_ok &= forward(sp, X).tobytes() == forward(pn.network, X).tobytes()

    (tmp_path / "g.idx").write_bytes(bytes.fromhex("00000803 00000001 00000002 00000002") + bytes([0, 255, 128, 0]))
    idx_ok = read_idx_images(tmp_path / "g.idx").tolist() == [[0.0, 1.0, 128 / 255, 0.0]]

    grid = build_grid(5)
    Xc = rng.random((200, 784))
    yc = rng.integers(0, 10, 200)
    risks, n_def = risk_curve(net, Xc, yc, "misclassify", grid)
    write_report(calibrate_risks(risks, n_def, 0.9, 0.1, grid=grid), tmp_path / "r.csv")
    _, rows = read_report_csv(tmp_path / "r.csv")
    csv_ok = [row["risk"] for row in rows] == risks.tolist() and [row["ratio"] for row in rows] == grid.tolist()
    elapsed = time.perf_counter() - start
    record(10, "format round-trips", ck_ok and sparse_ok and idx_ok and csv_ok and elapsed < 10,
           f"checkpoint {ck_ok}, sparse {sparse_ok}, IDX golden {idx_ok}, CSV risk curve {csv_ok}, {elapsed:.1f}s")
