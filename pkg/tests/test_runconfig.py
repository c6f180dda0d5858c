import pytest
from hypothesis import given, settings, strategies as st

from cassikit.blocks import MMBDenoiser
from cassikit.errors import FormatError, ParameterError
from cassikit.priors import IdentityProx, QuadraticProx, SoftThresholdProx, TvProx
from cassikit.runconfig import PROX_TAGS, RunConfig, format_run_config, parse_run_config


def test_defaults_and_empty_text():
    assert parse_run_config("") == RunConfig()
    assert parse_run_config("# only a comment\n\n") == RunConfig()
    cfg = RunConfig()
    sc = cfg.solver_config()
    assert sc.stages == 50 and sc.beta_mode == "nesterov"
    assert sc.mu[0] == 0.35 and sc.mu[1] == pytest.approx(0.35 * 1.05)


def test_parse_example():
    cfg = parse_run_config("prox = tv   # anisotropic\nstages = 50\neta0 = none\nbeta_mode = zero\n")
    assert cfg.prox == "tv" and cfg.stages == 50 and cfg.eta0 is None and cfg.beta_mode == "zero"


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 100), st.floats(1e-3, 1e3), st.floats(0.5, 2.0),
    st.sampled_from(["zero", "nesterov", "constant(0.3)"]), st.sampled_from(PROX_TAGS),
    st.floats(1e-4, 1), st.one_of(st.none(), st.floats(0, 10)), st.integers(0, 3), st.integers(0, 2**31),
)
def test_parse_print_round_trip(stages, mu0, rho, beta, prox, tau, eta0, step, seed):
    cfg = RunConfig(stages=stages, mu0=mu0, mu_rho=rho, beta_mode=beta, prox=prox, tau=tau,
                    eta0=eta0, step=step, seed=seed)
    text = format_run_config(cfg)
    assert parse_run_config(text) == cfg
    assert format_run_config(parse_run_config(text)) == text


@pytest.mark.parametrize("text,offset", [
    ("stages = 5\ncolour = red\n", 11),
    ("stages = 5\nstages = 6\n", 11),
    ("stages\n", 0),
])
def test_rejections_carry_offsets(text, offset):
    with pytest.raises(FormatError) as info:
        parse_run_config(text)
    assert info.value.offset == offset


@pytest.mark.parametrize("text", [
    "stages = five", "tau = nan", "prox = bm3d", "stages = 0", "beta_mode = constant(1.5)", "mu_rho = -1",
])
def test_bad_values(text):
    with pytest.raises(FormatError):
        parse_run_config(text)


def test_make_prox():
    kinds = {"tv": TvProx, "tv-iso": TvProx, "soft": SoftThresholdProx, "identity": IdentityProx,
             "quadratic": QuadraticProx, "mmb": MMBDenoiser}
    for tag, cls in kinds.items():
        assert isinstance(RunConfig(prox=tag).make_prox((8, 8, 2)), cls)
    assert RunConfig(prox="tv-iso").make_prox((4, 4, 1)).config.variant == "isotropic"
    with pytest.raises(ParameterError):
        RunConfig(step=-1)
