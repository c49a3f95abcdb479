"""Built-in diagnostic suites behind the selfcheck subcommand.

Three fast suites re-verify the package's load-bearing numerics from
scratch, without the test harness: hand-written gradients against central
finite differences, the moment-matching behavior of the restricted
objective, and the depth median against the sort oracle.  Each suite
returns a pass flag plus a one-line measurement; the CLI prints them and
turns any failure into a nonzero exit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from . import generators as gens
from . import nets
from .baselines import tv_learning_1d
from .nets import ACTIVATION_KINKS, Mlp
from .numkit import Rng, derive_seed
from .objectives import (
    BatchPair,
    ObjectiveKind,
    affine_features,
    disc_grad,
    game_value,
    gen_row_grads,
    restricted_js,
)

REL_TOL = 1e-5
ABS_TOL = 1e-8
_KINK_MARGIN = 1e-3


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _flatten(net: Mlp) -> np.ndarray:
    parts = [w.ravel() for w in net.weights] + [b.ravel() for b in net.biases]
    return np.concatenate(parts)


def _set(net: Mlp, flat: np.ndarray) -> None:
    pos = 0
    for w in net.weights:
        w[...] = flat[pos : pos + w.size].reshape(w.shape)
        pos += w.size
    for b in net.biases:
        b[...] = flat[pos : pos + b.size]
        pos += b.size


def _near_kink(net: Mlp, batch: np.ndarray) -> bool:
    zs, _ = nets._forward_cache(net, batch)
    last = net.n_weight_layers - 1
    for k, z in enumerate(zs):
        tag = net.output_act if k == last else net.acts[k]
        for kink in ACTIVATION_KINKS[tag]:
            if np.min(np.abs(z - kink), initial=np.inf) < _KINK_MARGIN:
                return True
    return False


def _fd(f: Callable[[np.ndarray], float], x0: np.ndarray) -> np.ndarray:
    g = np.zeros_like(x0)
    for i in range(x0.size):
        h = 1e-4 * max(1.0, abs(x0[i]))
        up = x0.copy()
        up[i] += h
        dn = x0.copy()
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (2.0 * h)
    return g


def _compare(analytic: np.ndarray, numeric: np.ndarray) -> Tuple[bool, float]:
    """(within tolerance, worst error as a fraction of the allowance).

    A coordinate passes when |analytic - numeric| <= ABS_TOL + REL_TOL *
    |analytic|: relative accuracy away from zero, absolute near zero.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    m = np.asarray(numeric, dtype=np.float64).ravel()
    ratio = np.abs(a - m) / (ABS_TOL + REL_TOL * np.abs(a))
    worst = float(ratio.max()) if ratio.size else 0.0
    return worst <= 1.0, worst


_DEPTHS = ((), (4,), (5, 3), (4, 3, 2))
_HIDDEN_TAGS = ("sigmoid", "relu", "ramp", "identity")


def _disc_case(rng: Rng, idx: int):
    """A random discriminator and a kink-free real/fake pair."""
    p = 2 + idx % 3
    hidden = _DEPTHS[idx % len(_DEPTHS)]
    acts = [_HIDDEN_TAGS[(idx + k) % len(_HIDDEN_TAGS)] for k in range(len(hidden))]
    net = nets.init(
        [p, *hidden, 1], acts=acts or None, scheme="gaussian_small", rng=rng
    )
    for w in net.weights:
        w *= 6.0
    for _ in range(80):
        real = rng.normal_matrix(5, p)
        fake = rng.normal_matrix(4, p) + 0.4
        if not (_near_kink(net, real) or _near_kink(net, fake)):
            return net, BatchPair(real, fake)
    raise AssertionError("no kink-free batch in 80 draws")


def run_gradient_suite(seed: int = 0) -> SuiteResult:
    """Discriminator, input, and generator gradients vs finite differences."""
    rng = Rng(derive_seed(seed, "selfcheck", "gradients"))
    worst = 0.0
    all_ok = True
    checks = 0

    for idx in range(8):
        kind = ObjectiveKind(tag=("js", "tv")[idx % 2])
        net, pair = _disc_case(rng.derive("disc", idx), idx)
        g = disc_grad(kind, net, pair)
        analytic = np.concatenate(
            [w.ravel() for w in g.weights] + [b.ravel() for b in g.biases]
        )
        probe = net.copy()

        def value_of(flat):
            _set(probe, flat)
            return game_value(kind, probe, pair)

        ok, rel = _compare(analytic, _fd(value_of, _flatten(net)))
        all_ok, worst, checks = all_ok and ok, max(worst, rel), checks + 1

        rows = gen_row_grads(kind, net, pair.fake)

        def value_of_fake(flat):
            return game_value(
                kind, net, BatchPair(pair.real, flat.reshape(pair.fake.shape))
            )

        ok, rel = _compare(rows, _fd(value_of_fake, pair.fake.ravel().copy()))
        all_ok, worst, checks = all_ok and ok, max(worst, rel), checks + 1

    for idx, family in enumerate(("affine", "elliptical")):
        kind = ObjectiveKind(tag=("js", "tv")[idx % 2])
        sub = rng.derive("gen", family)
        net, pair = _disc_case(sub.derive("net"), idx + 1)
        p = net.in_dim
        eta0 = 0.3 * sub.derive("eta").normal(p)
        if family == "affine":
            gen = gens.init_affine(
                p, eta=eta0, a=np.tril(np.eye(p) + 0.1 * sub.normal_matrix(p, p))
            )
        else:
            gen = gens.init_elliptical(
                p, sub.derive("radial"), hidden=(4,), noise_dim=3, eta=eta0
            )
        for attempt in range(80):
            inputs = gens.draw_inputs(gen, sub.derive("draw", attempt), 6)
            xi = inputs[0] if family == "elliptical" else inputs
            if family == "elliptical" and _near_kink(gen.radial, xi):
                continue
            fake = gen.eta + gens.shape_rows(gen, inputs)
            if not (_near_kink(net, fake) or _near_kink(net, pair.real)):
                break
        else:
            raise AssertionError("no kink-free generator batch in 80 draws")
        rows = gen_row_grads(kind, net, fake)
        gg = gens.grad_params(gen, inputs, rows)
        tril = np.tril_indices(p)
        parts = [gg.eta, gg.a[tril]]
        if gg.radial is not None:
            parts += [w.ravel() for w in gg.radial.weights]
            parts += [b.ravel() for b in gg.radial.biases]
        analytic = np.concatenate(parts)
        work = gen.copy()

        def gen_value_of(flat):
            work.eta = flat[:p].copy()
            a = np.zeros((p, p))
            a[tril] = flat[p : p + tril[0].size]
            work.a = a
            if family == "elliptical":
                _set(work.radial, flat[p + tril[0].size :])
            return game_value(
                kind,
                net,
                BatchPair(pair.real, work.eta + gens.shape_rows(work, inputs)),
            )

        base = [gen.eta, gen.a[tril]]
        if family == "elliptical":
            base.append(_flatten(gen.radial))
        ok, rel = _compare(analytic, _fd(gen_value_of, np.concatenate(base)))
        all_ok, worst, checks = all_ok and ok, max(worst, rel), checks + 1

    return SuiteResult(
        "gradients", all_ok, f"{checks} cases, worst error at {worst:.2e} of tolerance"
    )


def run_moment_suite(seed: int = 0) -> SuiteResult:
    """The restricted objective with linear features detects mean offsets.

    Near zero on fake data centered at the sample mean; clearly positive
    once the fake mean is shifted by 0.5.
    """
    rng = Rng(derive_seed(seed, "selfcheck", "moments"))
    n = 20000
    u = rng.derive("mask").uniform(0.0, 1.0, n)
    x = rng.derive("core").normal(n) + 4.0 * (u < 0.25)
    real = x[:, None]
    fake = (x.mean() + rng.derive("fake").normal(n))[:, None]
    matched = restricted_js(real, fake, affine_features)
    offset = restricted_js(real, fake + 0.5, affine_features)
    passed = matched <= 2e-3 and offset > 0.01
    return SuiteResult(
        "moment-matching",
        passed,
        f"matched mean {matched:.2e} (cap 2e-3), offset 0.5 gives {offset:.4f}"
        " (floor 0.01)",
    )


def run_median_suite(seed: int = 0) -> SuiteResult:
    """Depth maximization in 1-D equals the sort median on odd sizes."""
    rng = Rng(derive_seed(seed, "selfcheck", "median"))
    trials = 200
    mismatches = 0
    for k in range(trials):
        n = 2 * int(rng.derive("size", k).uniform(1.0, 76.0, 1)[0]) + 1
        x = 3.0 * rng.derive("data", k).normal(n) + float(k % 7)
        if tv_learning_1d(x) != float(np.median(x)):
            mismatches += 1
    return SuiteResult(
        "median-oracle", mismatches == 0, f"{trials} odd-n datasets, {mismatches} mismatches"
    )


def run_all(seed: int = 0) -> List[SuiteResult]:
    return [run_gradient_suite(seed), run_moment_suite(seed), run_median_suite(seed)]
