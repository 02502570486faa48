use proptest::prelude::*;
use userdrift::population::{
    augment_persona, map_answer, render_persona_prompt, AttributeSchema, AugmentedPersona, Persona, QaPair, UNKNOWN,
};
use userdrift::respondent::Scenario;
use userdrift::{tvd, DiscreteDistribution};

fn schema() -> AttributeSchema {
    AttributeSchema::categorical(
        "political ideology",
        ["Very conservative", "Conservative", "Moderate", "Liberal", "Very liberal"],
    )
    .unwrap()
}

fn dist_pair(k: usize) -> impl Strategy<Value = (DiscreteDistribution, DiscreteDistribution)> {
    let w = prop::collection::vec(0.001f64..1.0, k);
    (w.clone(), w).prop_map(move |(a, b)| {
        let s: Vec<String> = (0..a.len()).map(|i| format!("c{i}")).collect();
        (
            DiscreteDistribution::from_weights(s.clone(), &a).unwrap(),
            DiscreteDistribution::from_weights(s, &b).unwrap(),
        )
    })
}

proptest! {
    #[test]
    fn mapped_answers_are_fixed_points(raw in ".{0,40}") {
        let s = schema();
        let once = map_answer(&raw, &s);
        prop_assert!(once == UNKNOWN || s.options.contains(&once));
        prop_assert_eq!(map_answer(&once, &s), once);
    }

    #[test]
    fn options_survive_decoration(i in 0usize..5, pre in "[ .*]{0,3}", post in "[ .!]{0,3}", upper in any::<bool>()) {
        let s = schema();
        let opt = &s.options[i];
        let text = if upper { opt.to_uppercase() } else { opt.clone() };
        prop_assert_eq!(&map_answer(&format!("{pre}{text}{post}"), &s), opt);
    }

    #[test]
    fn tvd_is_a_bounded_symmetric_metric((p, q) in dist_pair(4), r in prop::collection::vec(0.001f64..1.0, 4)) {
        let r = DiscreteDistribution::from_weights(p.support().to_vec(), &r).unwrap();
        let pq = tvd(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - tvd(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!(tvd(&p, &p).unwrap().abs() < 1e-15);
        prop_assert!(pq <= tvd(&p, &r).unwrap() + tvd(&r, &q).unwrap() + 1e-12);
    }

    #[test]
    fn distinct_personas_render_distinct_prompts(a in "[a-z]{1,6}", b in "[a-z]{1,6}", age1 in 18u32..90, age2 in 18u32..90) {
        prop_assume!((a.clone(), age1) != (b.clone(), age2));
        let scenario = Scenario::opinionqa_immigration();
        let p1 = AugmentedPersona::new(Persona::new("x", [("age", age1.to_string()), ("sex", a)]).unwrap());
        let p2 = AugmentedPersona::new(Persona::new("x", [("age", age2.to_string()), ("sex", b)]).unwrap());
        prop_assert_ne!(render_persona_prompt(&p1, &scenario), render_persona_prompt(&p2, &scenario));
    }

    #[test]
    fn augmentation_only_appends(answers in prop::collection::vec("[a-z ]{1,10}", 1..4)) {
        let base = AugmentedPersona::new(Persona::new("p", [("age", "40")]).unwrap());
        let scenario = Scenario::opinionqa_immigration();
        let before = render_persona_prompt(&base, &scenario);
        let qa: Vec<QaPair> = answers
            .iter()
            .enumerate()
            .map(|(i, a)| QaPair { question: format!("What is your trait {i}?"), answer: a.trim().to_string() + "x" })
            .collect();
        let next = augment_persona(&base, 1, qa.clone()).unwrap();
        prop_assert_eq!(&next.base, &base.base);
        prop_assert_eq!(next.pairs().cloned().collect::<Vec<_>>(), qa);
        let after = render_persona_prompt(&next, &scenario);
        let shared = before.trim_end();
        prop_assert!(after.starts_with(shared), "{after}");
    }
}
