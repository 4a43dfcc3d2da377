mod common;

use std::sync::Arc;

use common::*;
use polyjson::backend::{Backend, BackendDescriptor, BackendKind, BackendRegistry, BuiltinBackend};
use polyjson::engine::{builtin_presets, LenienceConfig, BUILTIN_VERSION};
use polyjson::model::{canonical_serialize, equivalent, JsonValue, SerializeStyle};
use polyjson::multiversion::{mv_parse, Decision, MvError, MvStrategy};
use proptest::prelude::*;

const ALL_IDS: [&str; 13] = [
    "strict",
    "strict-4627",
    "trailing-comma",
    "unquoted-keys",
    "hex-numbers",
    "comments",
    "invalid-escapes",
    "lossy64-checked",
    "lossy64-rounding",
    "reject-duplicates",
    "null-dropper",
    "shuffled-keys",
    "crasher-deep",
];

fn strategies(ids: &[String]) -> Vec<MvStrategy> {
    let mut order = ids.to_vec();
    order.reverse();
    vec![
        MvStrategy::Majority,
        MvStrategy::UnanimousReject,
        MvStrategy::StrictFirst { backend: ids[0].clone() },
        MvStrategy::FirstAccepting { order },
    ]
}

fn strict_named(id: &str) -> Arc<dyn Backend> {
    Arc::new(
        BuiltinBackend::new(BackendDescriptor {
            id: id.to_owned(),
            kind: BackendKind::Builtin {
                config: LenienceConfig::strict(),
            },
            version: BUILTIN_VERSION.to_owned(),
        })
        .unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unanimity(doc in arb_plain_document()) {
        let registry = BackendRegistry::builtin();
        let text = canonical_serialize(&doc, &SerializeStyle::default());
        let ids = registry.ids();
        for s in strategies(&ids) {
            let r = mv_parse(&text, &registry, &s, None).unwrap();
            prop_assert!(!r.divergent, "{s}: {text}");
            prop_assert_eq!(r.clusters.len(), 1);
            match &r.decision {
                Decision::Accepted(v) => prop_assert!(equivalent(v, &doc)),
                Decision::Rejected => prop_assert!(false, "{s} rejected {text}"),
            }
        }
    }

    /// Scripted backends answer with one of a few values, reject or crash.
    #[test]
    fn majority_never_accepts_a_minority(answers in prop::collection::vec(0u8..5, 1..9)) {
        polyjson::backend::quiet_invocation_panics();
        let values = [JsonValue::Array(vec![1.into()]), JsonValue::Array(vec![2.into()]), JsonValue::Bool(true)];
        let mut registry = BackendRegistry::new();
        for (i, a) in answers.iter().enumerate() {
            let id = format!("b{i}");
            let b = match *a {
                3 => Scripted::rejecting(&id),
                4 => Scripted::panicking(&id),
                v => Scripted::constant(&id, Some(values[v as usize].clone())),
            };
            registry.push(b).unwrap();
        }
        let n = answers.len();
        let r = mv_parse("[1]", &registry, &MvStrategy::Majority, None).unwrap();
        let support = |v: &JsonValue| values.iter().zip(0u8..).filter(|(x, _)| equivalent(x, v))
            .map(|(_, k)| answers.iter().filter(|a| **a == k).count()).sum::<usize>();
        if let Decision::Accepted(v) = &r.decision {
            prop_assert!(2 * support(v) > n);
        } else {
            prop_assert!(values.iter().all(|v| 2 * support(v) <= n));
        }
        let seen = r.clusters.iter().map(|c| c.backends.len()).sum::<usize>() + r.rejecting.len() + r.crashing.len();
        prop_assert_eq!(seen, n);
        prop_assert_eq!(r.crashing.len(), answers.iter().filter(|a| **a == 4).count());
        if let Decision::Accepted(v) = &r.decision {
            prop_assert!(r.clusters.iter().any(|c| &c.representative == v));
        }
    }

    #[test]
    fn adding_strict_keeps_unanimous_rejections(
        picks in prop::sample::subsequence(ALL_IDS.to_vec(), 1..6),
        text in prop::sample::select(vec![
            "[1,]", "{a:1}", "[0x14]", "[\"\\x\"]", "[1]/*c*/", "[012]", "[1]]", "[1,", "1", "{\"a\":1,\"a\":2}",
            "[9223372036854775808]", "[1E400]", "[1]",
        ]),
    ) {
        let registry = BackendRegistry::builtin_subset(&picks, 42).unwrap();
        let before = mv_parse(text, &registry, &MvStrategy::UnanimousReject, None).unwrap();
        let mut wider = registry.clone();
        wider.push(strict_named("strict-extra")).unwrap();
        let after = mv_parse(text, &wider, &MvStrategy::UnanimousReject, None).unwrap();
        if !before.is_accepted() {
            prop_assert!(!after.is_accepted(), "{text} over {picks:?}");
        }
        if before.clusters.len() > 1 || (!before.clusters.is_empty() && !before.rejecting.is_empty()) {
            prop_assert!(before.divergent);
        }
    }
}

#[test]
fn trailing_comma_examples() {
    let registry = BackendRegistry::builtin_subset(&["strict", "strict-4627", "trailing-comma"], 42).unwrap();
    let r = mv_parse("[1,]", &registry, &MvStrategy::Majority, None).unwrap();
    assert_eq!(r.decision, Decision::Rejected);
    assert!(r.divergent);
    assert_eq!(r.clusters.len(), 1);
    assert_eq!(r.rejecting_ids(), ["strict", "strict-4627"]);

    let first: MvStrategy = "first-accepting:trailing-comma,strict".parse().unwrap();
    let r = mv_parse("[1,]", &registry, &first, None).unwrap();
    assert_eq!(r.decision, Decision::Accepted(JsonValue::Array(vec![1.into()])));
    assert!(r.divergent);

    let bad: MvStrategy = "strict-first:nope".parse().unwrap();
    assert_eq!(mv_parse("[1]", &registry, &bad, None), Err(MvError::UnknownBackend("nope".into())));
    assert_eq!(
        mv_parse("[1]", &BackendRegistry::new(), &MvStrategy::Majority, None),
        Err(MvError::NoBackends)
    );
}

#[test]
fn crashes_are_absorbed() {
    let registry = BackendRegistry::builtin();
    let deep = "[".repeat(1000);
    let r = mv_parse(&deep, &registry, &MvStrategy::UnanimousReject, None).unwrap();
    assert_eq!(r.crashing_ids(), ["crasher-deep"]);
    assert_eq!(r.rejecting.len(), builtin_presets(42).len() - 1);
    assert!(!r.is_accepted());
    let doc: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(doc["decision"], "rejected");
}
