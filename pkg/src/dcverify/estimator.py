"""scikit-learn style front end.

``fit`` takes the target circuit and does the classical work (cut search,
layering, reduction detection); ``estimate`` consumes copies of rho_out.
Hyperparameters are plain constructor arguments, so ``get_params`` /
``set_params`` / ``clone`` behave as usual.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .circuit import Circuit
from .decompose import find_reduction
from .estimate import (
    EstimatorConfig,
    FidelityEstimate,
    algorithm1,
    direct_fidelity_estimate,
    is_clifford,
)
from .partition import decompose_circuit
from .sim import NoiseModel
from ._validation import NonCliffordError


def _noise(p1, p2, gamma, readout) -> NoiseModel:
    return NoiseModel(p1=p1, p2=p2, gamma=gamma, readout_flip=readout)


class DivideAndConquerVerifier(BaseEstimator):
    """Fidelity estimation through the split circuits.

    After ``fit``: ``partition_``, ``decomposition_``, ``reduced_``,
    ``config_``. After ``estimate``: ``estimate_``.
    """

    def __init__(self, epsilon=0.1, delta=0.05, t1=0, t2=0, t3=1024, mode="enumerated", seed=0,
                 p1=0.0, p2=0.0, gamma=0.0, readout=0.0, state_p1=0.0, state_p2=0.0,
                 cut_mode="exact", side_a=None, reduce="auto", max_shots=10**9, max_terms=2**16,
                 record_shots=False):
        self.epsilon = epsilon
        self.delta = delta
        self.t1 = t1
        self.t2 = t2
        self.t3 = t3
        self.mode = mode
        self.seed = seed
        self.p1 = p1
        self.p2 = p2
        self.gamma = gamma
        self.readout = readout
        self.state_p1 = state_p1
        self.state_p2 = state_p2
        self.cut_mode = cut_mode
        self.side_a = side_a
        self.reduce = reduce
        self.max_shots = max_shots
        self.max_terms = max_terms
        self.record_shots = record_shots

    def _make_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            epsilon=self.epsilon, delta=self.delta, t1=self.t1, t2=self.t2, t3=self.t3, mode=self.mode,
            seed=self.seed, noise=_noise(self.p1, self.p2, self.gamma, self.readout),
            state_noise=NoiseModel(p1=self.state_p1, p2=self.state_p2), cut_mode=self.cut_mode,
            reduce=self.reduce, max_shots=self.max_shots, max_terms=self.max_terms,
            record_shots=self.record_shots,
        )

    def fit(self, X: Circuit, y=None):
        if not isinstance(X, Circuit):
            raise TypeError("fit expects a Circuit")
        self.config_ = self._make_config()
        self.target_ = X
        self.partition_, self.decomposition_ = decompose_circuit(X, self.cut_mode, self.side_a)
        self.reduced_ = self.reduce != "off" and find_reduction(self.decomposition_) is not None
        return self

    def _check_fitted(self):
        if not hasattr(self, "decomposition_"):
            raise NotFittedError("call fit(circuit) first")

    def estimate(self, rho=None) -> FidelityEstimate:
        """Run the protocol; ``rho`` defaults to the target under the state noise."""
        self._check_fitted()
        self.estimate_ = algorithm1(self.target_, self.config_, rho,
                                    decomposition=(self.partition_, self.decomposition_))
        return self.estimate_

    def score(self, X=None, y=None) -> float:
        """Estimated fidelity; ``X`` optionally supplies rho_out."""
        return self.estimate(X).f_est


class DirectPauliEstimator(BaseEstimator):
    """Baseline: measure every stabilizer in local Pauli bases (Clifford targets)."""

    def __init__(self, shots=1024, delta=0.05, seed=0, p1=0.0, p2=0.0, gamma=0.0, readout=0.0,
                 state_p1=0.0, state_p2=0.0, analytic=False):
        self.shots = shots
        self.delta = delta
        self.seed = seed
        self.p1 = p1
        self.p2 = p2
        self.gamma = gamma
        self.readout = readout
        self.state_p1 = state_p1
        self.state_p2 = state_p2
        self.analytic = analytic

    def fit(self, X: Circuit, y=None):
        if not isinstance(X, Circuit):
            raise TypeError("fit expects a Circuit")
        if not is_clifford(X):
            raise NonCliffordError("direct Pauli estimation needs a Clifford target")
        self.target_ = X
        self.config_ = EstimatorConfig(delta=self.delta, seed=self.seed,
                                       noise=_noise(self.p1, self.p2, self.gamma, self.readout),
                                       state_noise=NoiseModel(p1=self.state_p1, p2=self.state_p2))
        return self

    def estimate(self, rho=None) -> tuple[float, float]:
        """``(estimate, Hoeffding half-width)``."""
        if not hasattr(self, "target_"):
            raise NotFittedError("call fit(circuit) first")
        self.estimate_, self.half_width_ = direct_fidelity_estimate(
            self.target_, self.shots, self.config_, rho, self.analytic)
        return self.estimate_, self.half_width_

    def score(self, X=None, y=None) -> float:
        return self.estimate(X)[0]
