use metacrisp::knowledge::{
    define_schema, is_reflective, validate_complete, validate_instance, AttributeDef, Domain, InformationState, Schema,
    Scope, Value,
};
use metacrisp::world::{GridWorld, RoverParams};
use metacrisp::Error;
use proptest::prelude::*;

fn schema() -> Schema {
    define_schema(
        vec![
            AttributeDef::new("terrain", Scope::World, Domain::categorical(["sand", "rock", "ice"])),
            AttributeDef::new("wet", Scope::World, Domain::Boolean),
            AttributeDef::new("distance", Scope::World, Domain::Numeric { low: 0.0, high: 14.0 }),
            AttributeDef::new("fatigue", Scope::Modeller, Domain::Numeric { low: 0.0, high: 1.0 }),
            AttributeDef::new("strategy", Scope::Modeller, Domain::categorical(["FAST", "CAREFUL"])),
        ],
        "strategy",
    )
    .unwrap()
}

fn value() -> impl Strategy<Value = (usize, Value)> {
    prop_oneof![
        (0usize..=5, prop::sample::select(vec!["sand", "rock", "ice", "FAST", "CAREFUL", "mud"])).prop_map(|(i, s)| (i, Value::cat(s))),
        (0usize..=5, any::<bool>()).prop_map(|(i, b)| (i, Value::Bool(b))),
        (0usize..=5, -2.0f64..20.0).prop_map(|(i, x)| (i, Value::Num(x))),
    ]
}

const NAMES: [&str; 6] = ["terrain", "wet", "distance", "fatigue", "strategy", "unknown"];

fn outcome(r: metacrisp::Result<()>) -> String {
    r.map_or_else(|e| format!("{e}"), |_| "ok".into())
}

proptest! {
    #[test]
    fn validation_is_order_independent(pairs in prop::collection::vec(value(), 0..8), seed in any::<u64>()) {
        // later duplicates win, as in a map insertion
        let forward = pairs.iter().fold(InformationState::new(0), |s, (i, v)| s.with(NAMES[*i], v.clone()));
        let mut dedup: Vec<(usize, Value)> = Vec::new();
        for (i, v) in pairs.iter().rev() {
            if !dedup.iter().any(|(j, _)| j == i) {
                dedup.push((*i, v.clone()));
            }
        }
        let k = dedup.len().max(1);
        dedup.rotate_left((seed as usize) % k);
        let permuted = dedup.iter().fold(InformationState::new(0), |s, (i, v)| s.with(NAMES[*i], v.clone()));
        prop_assert_eq!(&forward, &permuted);
        let s = schema();
        prop_assert_eq!(outcome(validate_instance(&s, &forward)), outcome(validate_instance(&s, &permuted)));
        prop_assert_eq!(outcome(validate_complete(&s, &forward)), outcome(validate_complete(&s, &permuted)));
    }

    #[test]
    fn state_roundtrip_is_byte_identical(pairs in prop::collection::vec(value(), 0..8), epoch in any::<u64>()) {
        let st = pairs.iter().fold(InformationState::new(epoch), |s, (i, v)| s.with(NAMES[*i], v.clone()));
        let text = st.to_json();
        let back = InformationState::from_json(&text).unwrap();
        prop_assert_eq!(&back, &st);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn reflective_iff_self_attribute(pairs in prop::collection::vec(value(), 0..6)) {
        let st = pairs.iter().fold(InformationState::new(0), |s, (i, v)| s.with(NAMES[*i], v.clone()));
        let expected = st.values.keys().any(|k| k == "fatigue" || k == "strategy");
        prop_assert_eq!(is_reflective(&schema(), &st), expected);
    }
}

#[test]
fn schema_files_roundtrip() {
    for s in [schema(), GridWorld::generate(&RoverParams::default(), 3).unwrap().schema()] {
        let text = s.to_json();
        let back = Schema::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
    }
}

#[test]
fn invalid_schema_files_are_rejected() {
    let text = schema().to_json().replace("\"class_attribute\": \"strategy\"", "\"class_attribute\": \"distance\"");
    assert!(Schema::from_json(&text).is_err());
    let dup = schema().to_json().replace("\"wet\"", "\"terrain\"");
    assert!(matches!(Schema::from_json(&dup), Err(Error::Json(_))));
}
