//! Byte-level tokenizer with two reserved special ids.

/// Ids `0..=255` are raw bytes.
pub const BYTE_VOCAB: u32 = 256;
pub const EOS: u32 = 256;
pub const RM_SCORE: u32 = 257;
pub const VOCAB_SIZE: usize = 258;

pub const EOS_TEXT: &str = "<eos>";
pub const RM_SCORE_TEXT: &str = "<rm_score>";

pub fn tokenize(bytes: &[u8]) -> Vec<u32> {
    bytes.iter().map(|&b| u32::from(b)).collect()
}

pub fn tokenize_str(text: &str) -> Vec<u32> {
    tokenize(text.as_bytes())
}

/// Inverse of [`tokenize`]. Special ids render as `<eos>` / `<rm_score>`;
/// ids outside the vocabulary render as `<unk>`.
pub fn detokenize(ids: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        match id {
            b if b < BYTE_VOCAB => out.push(b as u8),
            EOS => out.extend_from_slice(EOS_TEXT.as_bytes()),
            RM_SCORE => out.extend_from_slice(RM_SCORE_TEXT.as_bytes()),
            _ => out.extend_from_slice(b"<unk>"),
        }
    }
    out
}

pub fn detokenize_lossy(ids: &[u32]) -> String {
    String::from_utf8_lossy(&detokenize(ids)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_round_trip() {
        assert!(tokenize(b"").is_empty());
        assert!(detokenize(&[]).is_empty());
    }

    #[test]
    #[allow(clippy::assertions_on_constants)]
    fn specials_are_outside_byte_range() {
        assert!(EOS >= BYTE_VOCAB && RM_SCORE >= BYTE_VOCAB && EOS != RM_SCORE);
        assert!((RM_SCORE as usize) < VOCAB_SIZE);
        assert_eq!(detokenize(&[RM_SCORE, b'x' as u32, EOS]), b"<rm_score>x<eos>");
        // literal tag text stays plain bytes
        assert!(tokenize_str("<rm_score>").iter().all(|&t| t < BYTE_VOCAB));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn byte_round_trip(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            prop_assert_eq!(detokenize(&tokenize(&bytes)), bytes);
        }
    }
}
