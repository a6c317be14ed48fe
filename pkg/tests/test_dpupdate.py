import pytest
import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from fixture_models import tiny, random_models, random_beliefs
from inc_prune.config.models import ObservationOrder, UpdateKind, UpdateVariant
from inc_prune.engine import dpupdate
from inc_prune.engine.errors import CombinatorialBlowup, NumericalFailure, ProvenanceMissing
from inc_prune.engine.dpupdate import (FoldOracle, build_sza, dp_update, exhaustive_sa, inc_prune,
                                       restricted_dominate_oracle, tau)
from inc_prune.engine.lp import LpCounter
from inc_prune.engine.model import Belief, belief_update, observation_prob
from inc_prune.engine.pwlc import AlphaVector, VectorSet, cross_sum, purge
from inc_prune.engine.solver import oracle_values, zero_function
from inc_prune.shell.report import StageRecord

ALL_KINDS = list(UpdateKind)


def rows(V: VectorSet):
    return [tuple(v.coeffs) for v in V]


def stage_sets(model, stages, kind=UpdateKind.EXHAUSTIVE, **variant):
    S = zero_function(model.n_states)
    out = []
    for _ in range(stages):
        S, _ = dp_update(model, S, UpdateVariant(kind=kind, **variant))
        out.append(S)
    return out


def test_tau_examples():
    model = tiny()
    zero = AlphaVector(np.zeros(2))
    image = tau(model, zero, 0, 0)
    assert_array_equal(image.coeffs, [0.5, 0.0])
    assert image.action == 0

    flat = tiny(0.0)
    for alpha in ([3.0, -2.0], [10.0, 10.0]):
        assert_array_equal(tau(flat, AlphaVector(np.array(alpha)), 0, 1).coeffs, [0.5, 0.0])


@pytest.mark.parametrize("seed", range(4))
def test_tau_agrees_with_belief_update(seed):
    model = random_models(seed, 1, states=(3,))[0]
    rng = np.random.Generator(np.random.PCG64(seed))
    alpha = AlphaVector(rng.uniform(-5, 5, size=3))
    Z = model.n_observations
    for probs in random_beliefs(seed, 3, 10):
        x = Belief(probs)
        for a in range(model.n_actions):
            for z in range(Z):
                pz = observation_prob(model, x, a, z)
                if pz <= 0:
                    continue
                expected = (model.reward[a] @ x.probs) / Z + model.discount * pz * (
                    belief_update(model, x, a, z).probs @ alpha.coeffs)
                assert x.probs @ tau(model, alpha, a, z).coeffs == pytest.approx(expected, abs=1e-12)


def test_build_sza():
    model = tiny()
    sza = build_sza(model, zero_function(2), 0, 0)
    assert rows(sza) == [(0.5, 0.0)]
    assert sza[0].action == 0
    assert sza[0].parents == ((0,),)

    S = VectorSet.of([1, 0], [0, 1], [0.6, 0.6])
    for a in range(2):
        for z in range(2):
            assert len(build_sza(model, S, a, z)) <= len(S)


def test_exhaustive_examples():
    singletons = [VectorSet.of([1, 2], action=0), VectorSet.of([0.5, 0], action=0), VectorSet.of([0, 3], action=0)]
    result, _ = exhaustive_sa(singletons)
    assert rows(result) == [(1.5, 5.0)]

    result, _ = exhaustive_sa([VectorSet.of([0.5, 0], action=0), VectorSet.of([0.5, 0], action=0)])
    assert rows(result) == [(1.0, 0.0)]
    assert result[0].action == 0

    A = VectorSet.of([1, 0], [0, 1], [0.6, 0.6])
    B = VectorSet.of([2, 0], [0, 2], [1.5, 1], [1, 1.5])
    result, _ = exhaustive_sa([A, B])
    assert len(result) >= 4
    folded, stats = inc_prune([A, B], UpdateVariant(kind=UpdateKind.RR))
    assert folded.canonically_equal(result)
    assert stats.fold_sizes == [[3, len(folded)]]


def test_exhaustive_cap():
    sets = [VectorSet.of([1, 0], [0, 1], [0.6, 0.6])] * 3
    with pytest.raises(CombinatorialBlowup) as info:
        exhaustive_sa(sets, cap=26)
    assert info.value.size == 27


def test_inc_prune_single_set_is_returned():
    S = VectorSet(VectorSet.of([1, 0], [0, 1]), minimal=True)
    result, stats = inc_prune([S], UpdateVariant(kind=UpdateKind.IP))
    assert result is S
    assert stats.lp_count == 0


def test_dp_update_tiny():
    model = tiny()
    S, stats = dp_update(model, zero_function(2), UpdateVariant(kind=UpdateKind.IP))
    assert rows(S) == [(1.0, 0.0)]
    assert S[0].action == 0
    assert stats.sa_sizes == [1, 1]
    assert stats.sza_sizes == [[1, 1], [1, 1]]
    assert stats.output_size == 1


def test_dp_update_without_discount():
    model = tiny(0.0)
    S = VectorSet(VectorSet.of([5, -1], [-1, 5]), True)
    for kind in ALL_KINDS:
        result, _ = dp_update(model, S, UpdateVariant(kind=kind))
        assert rows(result) == [(1.0, 0.0)]


@pytest.mark.parametrize("seed", range(6))
def test_variants_agree_stage_by_stage(seed):
    model = random_models(seed, 1)[0]
    reference = stage_sets(model, 3)
    for kind in ALL_KINDS[1:]:
        for t, S in enumerate(stage_sets(model, 3, kind)):
            assert S.canonically_equal(reference[t]), f"{kind.value} differs at stage {t + 1}"


@pytest.mark.parametrize("seed", range(3))
def test_fold_order_and_parallel_actions(seed):
    model = random_models(100 + seed, 1, observations=(3,))[0]
    natural = stage_sets(model, 3, UpdateKind.RR)
    smallest = stage_sets(model, 3, UpdateKind.RR, observation_order=ObservationOrder.SMALLEST_FIRST)
    for a, b in zip(natural, smallest):
        assert a.canonically_equal(b)

    S = natural[1]
    serial, serial_stats = dp_update(model, S, UpdateVariant(kind=UpdateKind.RR_MIN))
    threaded, threaded_stats = dp_update(model, S, UpdateVariant(kind=UpdateKind.RR_MIN, parallel_actions=True))
    assert rows(serial) == rows(threaded)
    assert serial_stats.lp_count == threaded_stats.lp_count
    assert serial_stats.constraint_total == threaded_stats.constraint_total


@pytest.mark.parametrize("seed", range(4))
def test_stats_are_conserved(seed):
    model = random_models(seed, 1)[0]
    S = zero_function(model.n_states)
    for _ in range(3):
        previous = S
        S, stats = dp_update(model, S, UpdateVariant(kind=UpdateKind.RR))
        assert stats.lp_count == sum(fs.lp_count for fs in stats.filter_log)
        assert stats.constraint_total == sum(fs.constraint_total for fs in stats.filter_log)
        assert stats.lp_count == sum(p.lp_count for p in stats.phases)
        assert all(fs.lp_count == fs.input_size - fs.corner_seeds for fs in stats.filter_log)
        assert len(stats.fold_sizes) == model.n_actions
        for sizes, operands in zip(stats.fold_sizes, stats.sza_sizes):
            assert sizes[0] == operands[0]
            assert all(after >= max(before, n) for before, after, n in zip(sizes, sizes[1:], operands[1:]))
        assert all(n <= len(previous) for sizes in stats.sza_sizes for n in sizes)
        assert stats.output_size == len(S)


def operand_sets(model, stages=2):
    """The S_z^a sets of action 0 after a few stages."""
    S = stage_sets(model, stages, UpdateKind.IP)[-1]
    return [build_sza(model, S, 0, z) for z in range(model.n_observations)]


class SideBySide(FoldOracle):
    """Runs the unrestricted D = A (+) B test next to the selected one."""

    def __init__(self, kind, A, B):
        super().__init__(kind, A, B)
        self.full = FoldOracle(UpdateKind.FULL, A, B)
        self.F = cross_sum(A, B)
        self.verdicts = 0

    def check(self, phi, winners, counter):
        witness = super().check(phi, winners, counter)
        reference = self.full.check(phi, winners, LpCounter())
        self.verdicts += 1
        if witness is None:
            # an empty restricted region means the full region is empty too
            assert reference is None
        else:
            # otherwise some vector outside W wins at the witness
            x = witness.x.probs
            best = np.max(self.F.matrix @ x)
            assert best > max(w.coeffs @ x for w in winners)
        return witness


@pytest.mark.parametrize("kind", [UpdateKind.RR, UpdateKind.RR_MIN, UpdateKind.CROSS])
@pytest.mark.parametrize("seed", range(10))
def test_restricted_oracles_are_sound(kind, seed):
    model = random_models(200 + seed, 1, observations=(3,))[0]
    sets = operand_sets(model)
    A, B = sets[0], sets[1]
    oracle = SideBySide(kind, A, B)
    F = cross_sum(A, B)
    W, stats = purge(F, oracle)
    reference, _ = purge(F)
    assert W.canonically_equal(reference)
    assert oracle.verdicts == len(F) - stats.corner_seeds


def test_restricted_oracle_sets():
    A = VectorSet.of([1, 0], [0, 1])
    B = VectorSet.of([2, 0], [0, 2], [1.5, 1.5])
    F = cross_sum(A, B)
    phi = F[5]                   # A[1] + B[2]
    winners = [F[0], F[4]]       # A[0] + B[0], A[1] + B[1]
    rr = FoldOracle(UpdateKind.RR, A, B)
    for w in winners:
        rr.admit(w)
    # |B| >= |A|, so D2 = (A (+) {β}) u {w built from α}
    assert rr.choose(phi, winners) == "d2"
    d2 = rr.comparison_set(phi, winners)
    assert sorted(map(tuple, d2)) == [(0.0, 3.0), (2.5, 1.5)]

    rr_min = FoldOracle(UpdateKind.RR_MIN, A, B)
    for w in winners:
        rr_min.admit(w)
    # running counts: |W| = 2, |D1| = 3 + 0, |D2| = 2 + 1
    assert rr_min.choose(phi, winners) == "w"

    full = restricted_dominate_oracle(phi, winners, A, B, UpdateKind.FULL)
    ip = restricted_dominate_oracle(phi, winners, A, B, UpdateKind.IP)
    assert (full is None) == (ip is None)


def test_provenance_is_required():
    A = VectorSet.of([1, 0], [0, 1])
    B = VectorSet.of([1, 0], [0, 1])
    bare = AlphaVector(np.array([1.0, 1.0]))
    with pytest.raises(ProvenanceMissing):
        restricted_dominate_oracle(bare, [], A, B, UpdateKind.RR)
    with pytest.raises(ProvenanceMissing):
        restricted_dominate_oracle(bare, [], A, B, UpdateKind.CROSS)
    # plain filtering never looks at provenance
    assert restricted_dominate_oracle(bare, [], A, B, UpdateKind.IP) is not None


class RejectEverything(FoldOracle):
    """Reports every witness region as empty, so only the corner winners survive."""

    def check(self, phi, winners, counter):
        counter.record(len(winners) + 1, None)
        return None


def test_fold_that_shrinks_is_a_numerical_failure(monkeypatch):
    monkeypatch.setattr(dpupdate, "FoldOracle", RejectEverything)
    A = VectorSet.of([1, 0], [0, 1], [0.6, 0.6])
    B = VectorSet.of([2, 0], [0, 2], [1.5, 1], [1, 1.5])
    with pytest.raises(NumericalFailure, match="shrank"):
        inc_prune([A, B], UpdateVariant(kind=UpdateKind.IP))


def test_stage_record_reports_fold_sizes():
    model = random_models(5, 1, observations=(3,))[0]
    S = stage_sets(model, 2, UpdateKind.RR)[-1]
    _, stats = dp_update(model, S, UpdateVariant(kind=UpdateKind.RR))
    record = StageRecord.of(3, stats, 0.0, model)
    assert list(record.fold_sizes) == list(model.actions)
    assert all(len(sizes) == 3 for sizes in record.fold_sizes.values())
    assert record.model_dump()["fold_sizes"] == record.fold_sizes

    _, stats = dp_update(model, S, UpdateVariant(kind=UpdateKind.EXHAUSTIVE))
    assert all(sizes == [] for sizes in StageRecord.of(3, stats, 0.0, model).fold_sizes.values())


def test_variants_agree_on_four_states_and_observations():
    model = random_models(77, 3, states=(4,), actions=(3,), observations=(4,))[0]
    reference = stage_sets(model, 3, UpdateKind.IP)
    for kind in (UpdateKind.RR, UpdateKind.FULL):
        for t, S in enumerate(stage_sets(model, 3, kind)):
            assert S.canonically_equal(reference[t]), f"{kind.value} differs at stage {t + 1}"
    beliefs = random_beliefs(77, model.n_states, 200)
    assert_allclose(reference[-1].values(beliefs), oracle_values(model, beliefs, 3), rtol=0, atol=1e-8)
