import math

import numpy as np
import pytest

from oracles import finite_diff_grad, rel_error
from ppmlab.errors import ContractError, NumericError
from ppmlab.nn.config import OptimSpec
from ppmlab.nn.losses import cross_entropy, multi_margin
from ppmlab.nn.optim import make_optimizer, make_scheduler, scheduler_lr
from ppmlab.nn.tensor import Parameter

rng = np.random.default_rng(2)


class TestCrossEntropy:
    def test_uniform_logits(self):
        logits = Parameter(np.zeros((1, 3)))
        loss = cross_entropy(logits, np.array([1]))
        assert float(loss.data) == pytest.approx(math.log(3))

    def test_batch_average(self):
        logits = Parameter(np.zeros((4, 2)))
        loss = cross_entropy(logits, np.array([0, 1, 0, 1]))
        assert float(loss.data) == pytest.approx(math.log(2))

    def test_gradient(self):
        data = rng.normal(size=(5, 4))
        targets = np.array([0, 3, 1, 2, 2])
        p = Parameter(data.copy())
        loss = cross_entropy(p, targets)
        loss.backward()
        numeric = finite_diff_grad(lambda: float(cross_entropy(Parameter(p.data), targets).data), p.data)
        assert rel_error(p.grad, numeric) < 1e-6

    def test_non_finite_rejected(self):
        logits = Parameter(np.array([[np.nan, 0.0]]))
        with pytest.raises(NumericError):
            cross_entropy(logits, np.array([0]))


class TestMultiMargin:
    def test_confident_correct_is_zero(self):
        logits = Parameter(np.array([[2.0, 0.0, 0.0]]))
        loss = multi_margin(logits, np.array([0]))
        assert float(loss.data) == 0.0

    def test_hand_value(self):
        logits = Parameter(np.array([[0.0, 2.0]]))
        loss = multi_margin(logits, np.array([0]))
        assert float(loss.data) == pytest.approx(1.5)

    def test_gradient(self):
        data = rng.normal(size=(6, 3)) * 2
        targets = np.array([0, 1, 2, 0, 1, 2])
        p = Parameter(data.copy())
        loss = multi_margin(p, targets)
        loss.backward()
        numeric = finite_diff_grad(lambda: float(multi_margin(Parameter(p.data), targets).data), p.data)
        assert rel_error(p.grad, numeric) < 1e-5


class TestOptimizers:
    def _step(self, spec, grad=2.0, value=1.0):
        p = Parameter(np.array([value]), name="p")
        p.grad = np.array([grad])
        opt = make_optimizer([p], spec)
        opt.step()
        return float(p.data[0])

    def test_sgd(self):
        assert self._step(OptimSpec(optimizer="sgd", learning_rate=0.1)) == pytest.approx(0.8)

    def test_sgd_momentum_accumulates(self):
        p = Parameter(np.array([0.0]), name="p")
        opt = make_optimizer([p], OptimSpec(optimizer="sgd", learning_rate=0.1, momentum=0.9))
        for _ in range(2):
            p.grad = np.array([1.0])
            opt.step()
        # v1 = 1, v2 = 1.9 -> total step 0.1 * (1 + 1.9)
        assert float(p.data[0]) == pytest.approx(-0.29)

    def test_adam_first_step_is_lr(self):
        new = self._step(OptimSpec(optimizer="adam", learning_rate=1e-3), grad=1.0)
        assert 1.0 - new == pytest.approx(1e-3, rel=1e-6)

    def test_rmsprop_first_step(self):
        spec = OptimSpec(optimizer="rmsprop", learning_rate=0.01, alpha=0.9, eps=0.0)
        # sq = 0.1 * g^2 -> update = lr * g / sqrt(0.1 g^2) = lr / sqrt(0.1)
        new = self._step(spec, grad=2.0)
        assert 1.0 - new == pytest.approx(0.01 / math.sqrt(0.1))

    def test_weight_decay_and_l1_enter_gradient(self):
        spec = OptimSpec(optimizer="sgd", learning_rate=0.1, weight_decay=0.5, l1_coeff=0.1)
        # g = 0 + 0.5*1 + 0.1*sign(1) = 0.6
        assert self._step(spec, grad=0.0) == pytest.approx(1.0 - 0.06)

    def test_per_parameter_l2(self):
        p = Parameter(np.array([1.0]), name="p", l2=0.5)
        p.grad = np.array([0.0])
        opt = make_optimizer([p], OptimSpec(optimizer="sgd", learning_rate=0.1))
        opt.step()
        assert float(p.data[0]) == pytest.approx(0.95)


class TestSchedulers:
    def test_exponential(self):
        spec = OptimSpec(learning_rate=0.1, scheduler="exponential", scheduler_params={"gamma": 0.9})
        assert scheduler_lr(spec, 2) == pytest.approx(0.1 * 0.81)

    def test_step(self):
        spec = OptimSpec(learning_rate=1.0, scheduler="step",
                         scheduler_params={"step_size": 10, "gamma": 0.5})
        assert scheduler_lr(spec, 9) == 1.0
        assert scheduler_lr(spec, 10) == 0.5
        assert scheduler_lr(spec, 25) == 0.25

    def test_polynomial_hits_zero(self):
        spec = OptimSpec(learning_rate=1.0, scheduler="polynomial",
                         scheduler_params={"total_iters": 10, "power": 1.0})
        assert scheduler_lr(spec, 5) == pytest.approx(0.5)
        assert scheduler_lr(spec, 10) == 0.0

    def test_cosine(self):
        spec = OptimSpec(learning_rate=1.0, scheduler="cosine_annealing",
                         scheduler_params={"t_max": 10, "eta_min": 0.0})
        assert scheduler_lr(spec, 0) == pytest.approx(1.0)
        assert scheduler_lr(spec, 10) == pytest.approx(0.0, abs=1e-12)
        assert scheduler_lr(spec, 5) == pytest.approx(0.5)

    def test_cyclic_triangle(self):
        spec = OptimSpec(learning_rate=0.1, scheduler="cyclic",
                         scheduler_params={"max_lr": 0.5, "step_size_up": 4})
        assert scheduler_lr(spec, 0) == pytest.approx(0.1)
        assert scheduler_lr(spec, 4) == pytest.approx(0.5)
        assert scheduler_lr(spec, 8) == pytest.approx(0.1)

    def test_one_cycle_peak(self):
        spec = OptimSpec(learning_rate=0.1, scheduler="one_cycle",
                         scheduler_params={"max_lr": 1.0, "pct_start": 0.25, "total_steps": 100})
        assert scheduler_lr(spec, 25) == pytest.approx(1.0)
        assert scheduler_lr(spec, 0) == pytest.approx(1.0 / 25)
        assert scheduler_lr(spec, 100) < 1e-3

    def test_inverse_time(self):
        spec = OptimSpec(learning_rate=1.0, scheduler="inverse_time",
                         scheduler_params={"decay_rate": 0.5})
        assert scheduler_lr(spec, 4) == pytest.approx(1.0 / 3.0)

    def test_piecewise_constant(self):
        spec = OptimSpec(learning_rate=1.0, scheduler="piecewise_constant",
                         scheduler_params={"boundaries": [5, 10], "values": [1.0, 0.1, 0.01]})
        assert scheduler_lr(spec, 4) == 1.0
        assert scheduler_lr(spec, 5) == 0.1
        assert scheduler_lr(spec, 99) == 0.01

    def test_reduce_on_plateau_requires_metric(self):
        spec = OptimSpec(learning_rate=1.0, scheduler="reduce_on_plateau")
        with pytest.raises(ContractError):
            scheduler_lr(spec, 3)

    def test_reduce_on_plateau_drops_after_patience(self):
        spec = OptimSpec(learning_rate=1.0, scheduler="reduce_on_plateau",
                         scheduler_params={"factor": 0.5, "patience": 2, "threshold": 1e-4})
        sched = make_scheduler(spec)
        lrs = [sched.lr_at(e, metric=0.5) for e in range(5)]
        assert lrs[:3] == [1.0, 1.0, 1.0]  # first bad epochs tolerated
        assert lrs[3] == 0.5  # patience exceeded

    def test_nine_schedulers_exist(self):
        from ppmlab.nn.optim import _SCHEDULERS

        assert len(_SCHEDULERS) == 9
