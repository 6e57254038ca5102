import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypnoeval.core import Hypnodensity, Stage
from hypnoeval.ensemble import channel_majority_vote, select_members, soft_vote
from hypnoeval.errors import AlignmentError, ConfigError, EmptyEnsemble


def hd(*rows):
    return Hypnodensity(np.array(rows, dtype=float))


class TestSoftVote:
    def test_two_one_hots(self):
        out = soft_vote([hd([1, 0, 0, 0, 0]), hd([0, 1, 0, 0, 0])])
        np.testing.assert_allclose(out.probs, [[0.5, 0.5, 0, 0, 0]])

    def test_three_rows(self):
        out = soft_vote([hd([0.2, 0.8, 0, 0, 0]), hd([0.4, 0.6, 0, 0, 0]), hd([0.6, 0.4, 0, 0, 0])])
        np.testing.assert_allclose(out.probs, [[0.4, 0.6, 0, 0, 0]], atol=1e-15)

    def test_identical_members(self):
        h = Hypnodensity(np.random.default_rng(1).dirichlet(np.ones(5), 20))
        np.testing.assert_allclose(soft_vote([h, h, h]).probs, h.probs, atol=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyEnsemble):
            soft_vote([])

    def test_length_mismatch(self):
        with pytest.raises(AlignmentError):
            soft_vote([hd([1, 0, 0, 0, 0]), hd([1, 0, 0, 0, 0], [0, 1, 0, 0, 0])])

    @settings(max_examples=60)
    @given(st.integers(1, 8), st.integers(1, 40), st.integers(0, 2**32 - 1))
    def test_permutation_invariant_and_stochastic(self, m, t, seed):
        rng = np.random.default_rng(seed)
        members = [Hypnodensity(rng.dirichlet(np.ones(5), t)) for _ in range(m)]
        a = soft_vote(members).probs
        b = soft_vote([members[i] for i in rng.permutation(m)]).probs
        np.testing.assert_allclose(a, b, atol=1e-15)
        np.testing.assert_allclose(a.sum(axis=1), 1, atol=1e-12)
        assert (a >= 0).all()


class TestChannelMajority:
    def test_strict_majority(self):
        chans = [hd([0, 0, 0.9, 0.1, 0]), hd([0.1, 0, 0.8, 0.1, 0]), hd([0.7, 0.3, 0, 0, 0])]
        assert channel_majority_vote(chans).stages[0] == Stage.N2

    def test_tie_broken_by_mass(self):
        # W: 0.6 + 0.1 = 0.7 against N2: 0.3 + 0.8 = 1.1
        chans = [hd([0.6, 0, 0.3, 0.1, 0]), hd([0.1, 0, 0.8, 0.1, 0])]
        assert channel_majority_vote(chans).stages[0] == Stage.N2

    def test_full_tie_lowest_code(self):
        chans = [hd([0.5, 0.5, 0, 0, 0]), hd([0.5, 0.5, 0, 0, 0])]
        assert channel_majority_vote(chans).stages[0] == Stage.W

    def test_mass_outside_tie_ignored(self):
        # REM has the largest summed mass (0.68) but only N1 and N3 got votes,
        # and those two tie on mass (0.66), so the lower code wins
        chans = [hd([0, 0.36, 0, 0.3, 0.34]), hd([0, 0.3, 0, 0.36, 0.34])]
        assert channel_majority_vote(chans).stages[0] == Stage.N1


class TestSelectMembers:
    models = {"a": hd([1, 0, 0, 0, 0]), "b": hd([0, 1, 0, 0, 0])}

    def test_all(self):
        assert len(select_members(self.models)) == 2

    def test_by_name(self):
        assert select_members(self.models, ["b"])[0] is self.models["b"]

    def test_unknown(self):
        with pytest.raises(ConfigError, match="zz"):
            select_members(self.models, ["a", "zz"])
