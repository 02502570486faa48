mod common;

use common::{assign, nth_persona, toy_persona, Brute};
use userdrift::scm::{generate_random_spec, Assignment, RespondentMode, Scm, SpecDims};
use userdrift::Arm;

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn toy_values_match_enumeration() {
    let scm = Scm::toy_drift_v1();
    let b = Brute::new(scm.spec());
    let l = toy_persona();
    let none = Assignment::new();
    let fit = assign(&[("fitness", "fit")]);
    let ab = RespondentMode::Abductive;

    // Frozen values first, then the brute force agrees with both.
    let post = b.posterior(&l, Some(1), &none, ab);
    assert!(close(post[0], 0.8));
    let post_fit = b.posterior(&l, Some(1), &fit, ab);
    assert!(close(post_fit[0], 36.0 / 37.0));
    assert!(close(b.conditional(&l, Some(1), &none, "Z", ab)[1], 0.74));
    assert!(close(b.conditional(&l, Some(0), &none, "Z", ab)[1], 0.26));
    assert!(close(b.mu(&l, 1, 1, &none, ab), 0.82));
    assert!(close(b.mu(&l, 0, 0, &none, ab), 0.44));
    assert!(close(b.mu(&l, 0, 1, &none, ab), 0.56));
    assert!(close(b.mu(&l, 1, 0, &none, ab), 0.58));
    assert!(close(b.tvd(&l, &none, ab), 0.48));
    assert!(close(b.tvd(&l, &fit, ab), 108.0 / 481.0));

    let lib_post = scm.latent_posterior(&l, Some(Arm::Treatment), &fit, ab).unwrap();
    assert!(close(lib_post.probs()[0], 36.0 / 37.0));
    let est = scm.exact_estimands(&l, &none, ab).unwrap();
    assert!(close(est.tau_obs, 0.38));
    assert!(close(est.sb, 0.18));
    assert!(close(est.tau_ate_mix, 0.20));
    assert!(close(est.tau_ate_prior, 0.20));
    assert!(close(scm.exact_tvd(&l, &["Z"], &fit, ab).unwrap(), 108.0 / 481.0));
}

#[test]
fn conditioning_on_the_confounder_reduces_toy_drift() {
    let scm = Scm::toy_drift_v1();
    let l = toy_persona();
    let ab = RespondentMode::Abductive;
    let base = scm.exact_tvd(&l, &["Z"], &Assignment::new(), ab).unwrap();
    for v in ["fit", "unfit"] {
        let t = scm.exact_tvd(&l, &["Z"], &assign(&[("fitness", v)]), ab).unwrap();
        assert!(t < base, "{v}: {t} vs {base}");
    }
}

fn dims(seed: u64) -> SpecDims {
    SpecDims {
        n_l: 1 + (seed % 2) as usize,
        n_x: 1 + (seed % 3) as usize,
        card: 2 + (seed % 2) as usize,
        n_z: 1 + (seed % 2) as usize,
        n_lprime: 1 + (seed % 2) as usize,
    }
}

#[test]
fn random_specs_match_enumeration() {
    for seed in 0..30u64 {
        let spec = generate_random_spec(seed, dims(seed), seed % 2 == 0).unwrap();
        let scm = Scm::new(spec.clone()).unwrap();
        let b = Brute::new(&spec);
        let lp = &spec.lprime_vars[0];
        let assignments = [Assignment::new(), assign(&[(&lp.name, &lp.states[1])])];
        for mode in [RespondentMode::Abductive, RespondentMode::Randomized] {
            for asg in &assignments {
                let l = nth_persona(&spec, seed as usize);
                for arm in Arm::BOTH {
                    let lib = scm.latent_posterior(&l, Some(arm), asg, mode).unwrap();
                    let bf = b.posterior(&l, Some(arm.index()), asg, mode);
                    for (x, y) in lib.probs().iter().zip(&bf) {
                        assert!(close(*x, *y), "seed {seed} posterior {x} vs {y}");
                    }
                    for var in spec.z_vars.iter().chain(&spec.lprime_vars).map(|v| &v.name).chain([&spec.outcome.name]) {
                        if asg.contains_key(var) {
                            continue;
                        }
                        let lib = scm.answer_distribution(&l, arm, var, asg, mode).unwrap();
                        let bf = b.conditional(&l, Some(arm.index()), asg, var, mode);
                        for (x, y) in lib.probs().iter().zip(&bf) {
                            assert!(close(*x, *y), "seed {seed} {var}: {x} vs {y}");
                        }
                    }
                }
                let est = scm.exact_estimands(&l, asg, mode).unwrap();
                assert!(close(est.mu_11, b.mu(&l, 1, 1, asg, mode)));
                assert!(close(est.mu_10, b.mu(&l, 1, 0, asg, mode)));
                assert!(close(est.mu_01, b.mu(&l, 0, 1, asg, mode)));
                assert!(close(est.mu_00, b.mu(&l, 0, 0, asg, mode)));
                assert!(close(est.tau_ate_prior, b.tau_ate_prior(&l, asg)));
                let z = scm.z_names();
                assert!(close(scm.exact_tvd(&l, &z, asg, mode).unwrap(), b.tvd(&l, asg, mode)));
            }
        }
    }
}
