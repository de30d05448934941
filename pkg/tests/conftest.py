import hypothesis
import pytest

from cogrelay import DirectLink, Policy, SystemConfig, load_config

hypothesis.settings.register_profile(
    "ci", max_examples=80, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow,
                           hypothesis.HealthCheck.filter_too_much],
)
hypothesis.settings.load_profile("ci")


def direct_config(
    lambda_p=0.35, lambda_1=0.0, lambda_2=0.0,
    p_succ_primary=0.5, p_succ_p_to_s1=0.7, p_succ_p_to_s2=0.7,
    s=(0.8, 0.8, 0.7, 0.528), r=(0.8, 0.9, 0.64, 0.72),
) -> SystemConfig:
    """Build a config from plain success values (s11, s12, s21, s22)."""
    return SystemConfig(
        lambda_p=lambda_p, lambda_1=lambda_1, lambda_2=lambda_2,
        p_succ_primary=p_succ_primary,
        p_succ_p_to_s1=p_succ_p_to_s1, p_succ_p_to_s2=p_succ_p_to_s2,
        secondary_links=((DirectLink(s[0]), DirectLink(s[1])),
                         (DirectLink(s[2]), DirectLink(s[3]))),
        relay_links=((DirectLink(r[0]), DirectLink(r[1])),
                     (DirectLink(r[2]), DirectLink(r[3]))),
    )


@pytest.fixture(scope="session")
def fig2():
    return load_config("fig2")


@pytest.fixture(scope="session")
def fig3():
    return load_config("fig3")


@pytest.fixture
def mixed_policy():
    return Policy(epsilon=0.6, rho=0.4, p1=0.5, p2=0.7, f1=0.3, f2=0.2,
                  alpha1=0.5, alpha2=0.4)
