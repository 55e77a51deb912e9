//! BERT-style source masking over current-sentence positions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::variants::ContextVariant;
use crate::corpus::vocab::{MASK, RESERVED};
use crate::model::encoder::SEG_CUR;

/// Masked positions and what stood there.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceMask {
    pub positions: Vec<usize>,
    pub original: Vec<usize>,
}

/// Masks current-sentence source positions at `mask_rate`. Of the chosen
/// positions, 80% become `<mask>`, 10% a random non-reserved token, 10%
/// stay unchanged; all chosen positions are scored by the mask loss.
pub fn apply_source_mask(
    variant: &ContextVariant,
    mask_rate: f64,
    vocab_size: usize,
    rng: &mut ChaCha8Rng,
) -> (ContextVariant, SourceMask) {
    assert!((0.0..1.0).contains(&mask_rate), "mask_rate outside [0,1)");
    assert!(vocab_size > RESERVED.len(), "vocabulary has no maskable tokens");
    let mut masked = variant.clone();
    let mut mask = SourceMask::default();
    if mask_rate == 0.0 {
        return (masked, mask);
    }
    for pos in 0..variant.src_ids.len() {
        if variant.src_segments[pos] != SEG_CUR {
            continue;
        }
        if rng.gen::<f64>() >= mask_rate {
            continue;
        }
        mask.positions.push(pos);
        mask.original.push(variant.src_ids[pos]);
        let roll: f64 = rng.gen();
        if roll < 0.8 {
            masked.src_ids[pos] = MASK;
        } else if roll < 0.9 {
            masked.src_ids[pos] = rng.gen_range(RESERVED.len()..vocab_size);
        }
        // remaining 10%: keep the original token
    }
    (masked, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::encoder::{SEG_PRE, SEG_SEP};
    use crate::rng;

    fn variant() -> ContextVariant {
        ContextVariant {
            option: 1,
            src_ids: vec![10, 11, 3, 12, 13, 14],
            src_segments: vec![SEG_PRE, SEG_PRE, SEG_SEP, SEG_CUR, SEG_CUR, SEG_CUR],
            ctx_ids: vec![],
            tgt_ids: vec![20, 2],
            tgt_segments: vec![SEG_CUR, SEG_CUR],
            tgt_loss_mask: vec![true, true],
            forced_tgt_prefix: vec![],
            dec_depth_delta: 1,
        }
    }

    #[test]
    fn rate_zero_is_identity() {
        let v = variant();
        let mut r = rng::stream(1, "mask");
        let (m, s) = apply_source_mask(&v, 0.0, 30, &mut r);
        assert_eq!(m, v);
        assert!(s.positions.is_empty());
    }

    #[test]
    fn only_current_positions_masked_and_reproducible() {
        let v = variant();
        let seen_a = {
            let mut r = rng::stream(7, "mask");
            apply_source_mask(&v, 0.9, 30, &mut r)
        };
        let seen_b = {
            let mut r = rng::stream(7, "mask");
            apply_source_mask(&v, 0.9, 30, &mut r)
        };
        assert_eq!(seen_a, seen_b);
        for &p in &seen_a.1.positions {
            assert_eq!(v.src_segments[p], SEG_CUR, "masked a context position");
        }
        // context region untouched
        assert_eq!(&seen_a.0.src_ids[..3], &v.src_ids[..3]);
    }

    #[test]
    fn masked_count_tracks_rate() {
        // 3 eligible positions x 4000 draws at rate 0.15 ~ Binomial(12000, 0.15)
        let v = variant();
        let mut total = 0usize;
        for seed in 0..4000u64 {
            let mut r = rng::stream(seed, "mask");
            let (_, s) = apply_source_mask(&v, 0.15, 30, &mut r);
            total += s.positions.len();
        }
        let expected = 12000.0 * 0.15;
        let sd = (12000.0 * 0.15 * 0.85f64).sqrt();
        assert!(
            (total as f64 - expected).abs() < 5.0 * sd,
            "masked {total}, expected about {expected}"
        );
    }

    #[test]
    fn eighty_ten_ten_split() {
        let v = variant();
        let (mut n_mask, mut n_keep, mut n_rand, mut n) = (0, 0, 0, 0);
        for seed in 0..6000u64 {
            let mut r = rng::stream(seed, "mask810");
            let (m, s) = apply_source_mask(&v, 0.5, 300, &mut r);
            for (&p, &orig) in s.positions.iter().zip(&s.original) {
                n += 1;
                if m.src_ids[p] == MASK {
                    n_mask += 1;
                } else if m.src_ids[p] == orig {
                    n_keep += 1;
                } else {
                    n_rand += 1;
                }
            }
        }
        let f = |c: usize| c as f64 / n as f64;
        assert!((f(n_mask) - 0.8).abs() < 0.02, "mask fraction {}", f(n_mask));
        // the random branch can draw the original id, so allow drift toward keep
        assert!((f(n_keep) - 0.1).abs() < 0.02, "keep fraction {}", f(n_keep));
        assert!((f(n_rand) - 0.1).abs() < 0.02, "rand fraction {}", f(n_rand));
    }
}
