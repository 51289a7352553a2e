use finqa_cbr::dsl::{arg_sequence, op_sequence, parse_program, serialize_program, Operand, ParseError};
use finqa_cbr::synth::{random_program, ROW_NAMES};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip_and_sequence_lengths(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let program = random_program(&mut rng, 6, ROW_NAMES);
        let text = serialize_program(&program);
        let reparsed = parse_program(&text).unwrap();
        prop_assert_eq!(&reparsed, &program);
        prop_assert_eq!(serialize_program(&reparsed), text);
        prop_assert_eq!(op_sequence(&program).len(), program.len());
        prop_assert_eq!(arg_sequence(&program).len(), 2 * program.len());
    }

    #[test]
    fn uppercase_names_parse_to_the_same_program(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let program = random_program(&mut rng, 5, &[]);
        let shouted = program
            .steps()
            .iter()
            .map(|s| format!("{}({}, {})", s.op.name().to_uppercase(), s.args[0], s.args[1]))
            .collect::<Vec<_>>()
            .join(", ");
        prop_assert_eq!(parse_program(&shouted).unwrap(), program);
    }

    #[test]
    fn references_at_or_after_their_step_are_rejected(steps in 1usize..6, offset in 0usize..3) {
        let mut parts: Vec<String> = (0..steps).map(|i| format!("add({i}, 1)")).collect();
        let last = steps - 1;
        parts[last] = format!("add(#{}, 1)", last + offset);
        let parsed = parse_program(&parts.join(", "));
        let is_forward = matches!(parsed, Err(ParseError::ForwardStepReference { .. }));
        prop_assert!(is_forward);
    }
}

#[test]
fn paper_example_sequences() {
    let p = parse_program("Divide(10, 2), Divide(9, 3), Subtract(#0, #1)").unwrap();
    assert_eq!(serialize_program(&p), "divide(10, 2), divide(9, 3), subtract(#0, #1)");
    assert_eq!(op_sequence(&p).iter().map(|o| o.name()).collect::<Vec<_>>(), ["divide", "divide", "subtract"]);
    assert_eq!(arg_sequence(&p), ["10", "2", "9", "3", "#0", "#1"]);
    assert_eq!(p.steps()[2].args, [Operand::StepRef(0), Operand::StepRef(1)]);
}

#[test]
fn release_spellings() {
    let p = parse_program("table_average(net revenue, none), divide(#0, const_1000000), multiply(#1, const_m1)").unwrap();
    assert_eq!(serialize_program(&p), "table-average(net revenue, none), divide(#0, const_1000000), multiply(#1, const_m1)");
    let p = parse_program("subtract(5.6%, $ 1,234), add(#0, -3.5)").unwrap();
    assert_eq!(serialize_program(&p), "subtract(5.6%, $ 1,234), add(#0, -3.5)");
    assert_eq!(p.steps()[0].args[1].numeric_value(), Some(1234.0));
}
