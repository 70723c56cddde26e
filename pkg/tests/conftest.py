import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# compiled kernels make the first example slow; wall-clock deadlines are meaningless here
settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def smooth_grad_check(build, pattern, max_seeds=20, **kwargs):
    """Gradient-check the first seed whose finite-difference steps stay on one smooth piece.

    ``build(seed)`` returns ``(loss_fn, arrays, grads)`` with the analytic
    gradients taken at the unperturbed point; ``pattern()`` digests the
    discrete choices (signs, max winners, neighbor sets) of the last
    evaluation. A seed is rejected when any perturbed evaluation changes that
    digest, since central differences across a kink measure nothing. The
    accepted seed's report is returned with the seed.
    """
    from pointmanifold.network import grad_check

    for seed in range(max_seeds):
        loss_fn, arrays, grads = build(seed)
        base = pattern()
        crossed = []

        def tracked():
            value = loss_fn()
            crossed.append(pattern() != base)
            return value

        report = grad_check(tracked, arrays, grads, **kwargs)
        if not any(crossed):
            return seed, report
    raise AssertionError(f"every one of {max_seeds} seeds crossed a non-differentiable point")


def pattern_digest(*arrays):
    return b"".join(np.ascontiguousarray(a).tobytes() for a in arrays)


def end_to_end_check(augmentation, h=1e-5, tolerance=1e-3, max_entries=8):
    """Finite-difference check of the whole toy network on a 2-cloud, 32-point batch.

    Float64, training mode (batch statistics, dropout with a fixed mask), loss
    is softmax cross-entropy; every parameter tensor and the input are
    sampled.
    """
    from pointmanifold.network import ArchitectureSpec, build_model, softmax_cross_entropy
    from pointmanifold.pointset import generate_shape
    from pointmanifold.training import prepare_features

    spec = ArchitectureSpec.toy(num_classes=3)
    labels = np.array([0, 2])
    state = {}

    def build(seed):
        model = build_model(spec, augmentation, seed=seed, dtype=np.float64)
        clouds = [generate_shape("torus", 32, seed=seed), generate_shape("helix", 32, seed=seed)]
        x = prepare_features(clouds, augmentation)
        state["model"] = model

        def loss_fn():
            logits = model.forward(x, train=True, rng=np.random.default_rng(5))
            return softmax_cross_entropy(logits, labels)[0]

        model.zero_grad()
        _, g = softmax_cross_entropy(model.forward(x, train=True, rng=np.random.default_rng(5)), labels)
        gx = model.backward(g)
        arrays = {name: p.value for name, p in model.named_parameters()}
        grads = {name: p.grad.copy() for name, p in model.named_parameters()}
        arrays["input"] = x
        grads["input"] = gx
        return loss_fn, arrays, grads

    return smooth_grad_check(
        build, lambda: state["model"].activation_pattern(), h=h, tolerance=tolerance, max_entries=max_entries
    )


def _layer_arrays(layer, x, gx):
    arrays = {name: p.value for name, p in layer.named_parameters()}
    grads = {name: p.grad.copy() for name, p in layer.named_parameters()}
    arrays["input"], grads["input"] = x, gx
    return arrays, grads


def edgeconv_grad_check(dynamic, h=1e-5, tolerance=1e-4):
    """EdgeConv with batch norm in training mode against a random linear functional.

    With ``dynamic`` the neighbor graph is recomputed from the (perturbed)
    input on every evaluation; otherwise it is fixed up front.
    """
    from pointmanifold.network import EdgeConv
    from pointmanifold.neighbors import knn

    state = {}

    def build(seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((2, 16, 4))
        ec = EdgeConv(4, 5, k=4, rng=seed)
        ec.bn.scale.value[:] = rng.uniform(0.5, 2.0, 5)
        graph = None if dynamic else np.stack([knn(x[b], 4).indices for b in range(2)])
        weights = rng.standard_normal((2, 16, 5))
        state["layer"] = ec

        def loss():
            return float((ec.forward(x, graph=graph, train=True) * weights).sum())

        ec.zero_grad()
        ec.forward(x, graph=graph, train=True)
        return (loss,) + _layer_arrays(ec, x, ec.backward(weights))

    return smooth_grad_check(build, lambda: state["layer"].pattern().tobytes(), h=h, tolerance=tolerance)


def mp_gate_grad_check(h=1e-5, tolerance=1e-4):
    """Projection gate (all three planes) against a random linear functional of its output."""
    from pointmanifold.network import MPGate

    state = {}

    def build(seed):
        rng = np.random.default_rng(seed)
        gate = MPGate((0, 1, 2), rng=seed)
        gate.fc1.bias.value[:] = 0.1 * rng.standard_normal(16)
        x = rng.standard_normal((2, 10, 3))
        weights = rng.standard_normal((2, 10, 9))
        state["layer"] = gate

        def loss():
            return float((gate.forward(x) * weights).sum())

        gate.zero_grad()
        gate.forward(x)
        return (loss,) + _layer_arrays(gate, x, gate.backward(weights))

    def pattern():
        gate = state["layer"]
        return gate.act1.pattern().tobytes() + gate.act2.pattern().tobytes()

    return smooth_grad_check(build, pattern, h=h, tolerance=tolerance)


# -- acceptance summary: one PASS/FAIL line per criterion at the end of the run

_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _acceptance.append(report)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for report in _acceptance:
        name = report.nodeid.split("::")[-1]
        number = int(name.split("_")[2])
        detail = dict(report.user_properties).get("detail", "")
        verdict = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")
