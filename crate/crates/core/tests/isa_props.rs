mod common;

use hdnn_core::isa::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn word_round_trip(instr in common::instruction()) {
        let word = encode(&instr).unwrap();
        prop_assert_eq!(decode(word).unwrap(), instr);
        prop_assert_eq!(word_from_bytes(&word_to_bytes(word)), word);
    }

    #[test]
    fn text_round_trip(instr in common::instruction()) {
        let text = instr.to_string();
        prop_assert_eq!(text.parse::<Instruction>().unwrap(), instr);
    }

    #[test]
    fn invalid_opcodes_rejected(instr in common::instruction(), bad in 5u128..8) {
        let word = encode(&instr).unwrap();
        let corrupt = (word & !(0b111 << 125)) | (bad << 125);
        prop_assert!(decode(corrupt).is_err());
    }

    #[test]
    fn reserved_bits_rejected(instr in common::instruction(), bit in 0u32..72) {
        let word = encode(&instr).unwrap();
        let flipped = word ^ (1u128 << bit);
        // Either the flip lands in a used field and decodes to a different
        // instruction, or it hits a reserved bit and is rejected.
        if let Ok(other) = decode(flipped) {
            prop_assert_ne!(other, instr);
        }
    }

    #[test]
    fn program_binary_round_trip(instrs in proptest::collection::vec(common::instruction(), 0..40)) {
        let program = Program { instructions: instrs, segments: Vec::new() };
        let bytes = program.to_bytes().unwrap();
        prop_assert_eq!(Program::from_bytes(&bytes).unwrap().instructions, program.instructions);
    }
}
