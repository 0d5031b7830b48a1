import numpy as np
import pytest

from libs.diffusion import FlowCodec, ODMatrix, decode_flows, encode_flows, make_schedule
from libs.diffusion.schedule import NoiseSchedule, default_beta_range
from libs.errors import DomainError, ShapeError, UsageError, ValidationError


def test_single_step_schedule():
    """T=1 with beta 0.1 leaves alpha_bar_1 = 0.9."""
    schedule = make_schedule(1, "linear", 0.1, 0.1)
    assert schedule.T == 1
    assert schedule.alpha_bar_at(1) == pytest.approx(0.9)
    assert schedule.alpha_bar_at(0) == 1.0


def test_two_step_product():
    """Betas 0.1 and 0.2 give alpha_bar_2 = 0.72."""
    schedule = make_schedule(2, "linear", 0.1, 0.2)
    assert schedule.beta_at(1) == pytest.approx(0.1)
    assert schedule.beta_at(2) == pytest.approx(0.2)
    assert schedule.alpha_bar_at(2) == pytest.approx(0.72)


def test_reference_schedule_destroys_signal():
    """The 1000-step reference schedule ends below 1e-4."""
    schedule = make_schedule(1000)
    assert schedule.beta[0] == pytest.approx(1e-4)
    assert schedule.beta[-1] == pytest.approx(0.02)
    assert schedule.alpha_bar_at(1000) < 1e-4


def test_default_range_scales_with_steps():
    """Shorter schedules use proportionally larger betas."""
    assert default_beta_range(200) == pytest.approx((5e-4, 0.1))
    assert default_beta_range(10) == pytest.approx((1e-2, 0.999))


def test_cosine_schedule_is_valid():
    """Cosine betas stay in range and alpha_bar decreases."""
    schedule = make_schedule(50, "cosine")
    assert np.all(schedule.beta >= 1e-8)
    assert np.all(schedule.beta <= 0.999)
    assert np.all(np.diff(schedule.alpha_bar) < 0)


@pytest.mark.parametrize(
    "args",
    [
        (0,),
        (10, "linear", 0.2, 0.1),
        (10, "linear", 0.0, 0.1),
        (10, "sigmoid"),
    ],
)
def test_invalid_schedules(args):
    """Bad step counts, ranges and kinds are domain errors."""
    with pytest.raises(DomainError):
        make_schedule(*args)


def test_schedule_rejects_out_of_range_beta():
    """A hand-built schedule must keep every beta inside (0, 1)."""
    with pytest.raises(DomainError):
        NoiseSchedule(beta=np.array([0.1, 1.0]))


def test_step_bounds():
    """Steps outside 1..T are rejected."""
    schedule = make_schedule(5)
    with pytest.raises(DomainError):
        schedule.beta_at(0)
    with pytest.raises(DomainError):
        schedule.alpha_bar_at(6)


def test_posterior_variance_first_step_is_zero():
    """The DDPM posterior variance vanishes at t = 1."""
    schedule = make_schedule(20)
    assert schedule.posterior_variance(1) == 0.0
    assert 0 < schedule.posterior_variance(10) < schedule.beta_at(10)


def test_codec_round_trip():
    """Integer flows survive encode then decode."""
    rng = np.random.default_rng(3)
    F = rng.integers(0, 500, size=(6, 6)).astype(float)
    od = ODMatrix(tuple(f"r{k}" for k in range(6)), F)
    codec = FlowCodec.fit([od])
    assert np.array_equal(codec.decode(codec.encode(F)), F)
    decoded = decode_flows(encode_flows(od, codec), codec, od.region_ids)
    assert decoded.region_ids == od.region_ids
    assert np.array_equal(decoded.F, F)


def test_codec_zero_flows():
    """With mean 0 and std 1, zero flows encode to zero."""
    codec = FlowCodec(mean=0.0, std=1.0)
    assert np.array_equal(codec.encode(np.zeros((2, 2))), np.zeros((2, 2)))


def test_codec_clamps_negative_flows():
    """Decoded values below zero become zero persons."""
    codec = FlowCodec(mean=0.0, std=1.0)
    assert codec.to_flows(np.array([np.log1p(-0.4)]))[0] == 0.0
    assert codec.decode(np.array([-5.0]))[0] == 0.0


def test_codec_fit_statistics():
    """Statistics are pooled over every entry of every training matrix."""
    a = ODMatrix(("x", "y"), np.array([[0.0, 1.0], [3.0, 7.0]]))
    b = ODMatrix(("x",), np.array([[15.0]]))
    codec = FlowCodec.fit([a, b])
    values = np.log1p([0.0, 1.0, 3.0, 7.0, 15.0])
    assert codec.mean == pytest.approx(values.mean())
    assert codec.std == pytest.approx(values.std())
    encoded = (values - values.mean()) / values.std()
    assert codec.z_range == pytest.approx((encoded.min(), encoded.max()))


def test_fitted_codec_caps_decoded_flows_at_training_maximum():
    """Values far outside the training range decode to the corpus extremes."""
    od = ODMatrix(("x", "y"), np.array([[0.0, 12.0], [3.0, 250.0]]))
    codec = FlowCodec.fit([od])
    decoded = codec.decode(np.array([1e6, np.inf, -1e6, -np.inf]))
    assert np.array_equal(decoded, [250.0, 250.0, 0.0, 0.0])


def test_unranged_codec_stays_finite():
    """Without a training range, extreme values still decode to finite non-negative flows."""
    codec = FlowCodec(mean=2.0, std=3.0)
    assert codec.z_range is None
    flows = codec.to_flows(np.array([1e6, np.inf, -1e6, -np.inf, 50.0]))
    assert np.all(np.isfinite(flows))
    assert np.all(flows >= 0.0)
    assert flows[0] == flows[1] > 1e300


def test_codec_constant_corpus():
    """Constant training flows fall back to std 1."""
    codec = FlowCodec.fit([ODMatrix(("x", "y"), np.full((2, 2), 4.0))])
    assert codec.std == 1.0


def test_unfitted_codec():
    """Encoding needs fitted statistics."""
    with pytest.raises(UsageError):
        FlowCodec().encode(np.zeros((1, 1)))
    with pytest.raises(DomainError):
        FlowCodec.fit([])


def test_od_matrix_validation():
    """OD matrices are square, non-negative and uniquely labelled."""
    with pytest.raises(ShapeError):
        ODMatrix(("a", "b"), np.zeros((2, 3)))
    with pytest.raises(DomainError):
        ODMatrix(("a",), np.array([[-1.0]]))
    with pytest.raises(ValidationError):
        ODMatrix(("a", "a"), np.zeros((2, 2)))


def test_od_matrix_reindexed():
    """Reindexing lays the same flows out in another order."""
    od = ODMatrix(("a", "b", "c"), np.arange(9.0).reshape(3, 3))
    moved = od.reindexed(("c", "a", "b"))
    assert moved.F[0, 1] == od.F[2, 0]
    assert moved.F[1, 2] == od.F[0, 1]
    with pytest.raises(ValidationError):
        od.reindexed(("a", "b", "d"))
