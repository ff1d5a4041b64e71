//! Tone frequencies implied by a stack's structure.
//!
//! Transposed and subpixel layers repeat the same weights every `r` output
//! samples, which puts a tone at `output_rate / r`. Each later upsampling
//! layer exposes images of every existing tone at `|m * input_rate +- f|`
//! below its Nyquist frequency. Once a bias or ReLU has introduced an
//! offset, later tonal layers also image the zero-frequency component at
//! multiples of their input rate. Interpolation layers add no tones of
//! their own: their filters have nulls at exactly those multiples.

use serde::{Deserialize, Serialize};

use crate::layer::{Activation, Layer, LayerKind, Stack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToneKind {
    Direct,
    Replica,
    OffsetReplica,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TonePrediction {
    pub frequency: f64,
    pub origin_layer: usize,
    pub kind: ToneKind,
}

const SAME_HZ: f64 = 1e-6;

fn has_weight_periodicity(layer: &Layer) -> bool {
    matches!(
        layer.spec.kind,
        LayerKind::TransposedConv | LayerKind::SubpixelConv
    ) && layer.spec.upsample_factor() > 1
}

fn introduces_offset(layer: &Layer) -> bool {
    layer.kernel.as_ref().is_some_and(|k| k.bias().is_some())
        || layer.spec.activation == Activation::Relu
}

fn push_unique(tones: &mut Vec<TonePrediction>, tone: TonePrediction, nyquist: f64) {
    if tone.frequency <= SAME_HZ || tone.frequency > nyquist + SAME_HZ {
        return;
    }
    let dup = tones
        .iter()
        .any(|t| t.kind == tone.kind && (t.frequency - tone.frequency).abs() < SAME_HZ);
    if !dup {
        tones.push(tone);
    }
}

/// Predicted tones, ordered by the layer that introduces them.
pub fn predict_tones(stack: &Stack) -> Vec<TonePrediction> {
    let mut tones: Vec<TonePrediction> = Vec::new();
    let mut offset_present = false;
    for (k, layer) in stack.layers().iter().enumerate() {
        let rin = layer.input_rate as f64;
        let rout = layer.output_rate as f64;
        let nyquist = rout / 2.0;
        if layer.spec.downsample_factor() > 1 {
            // aliasing folds tones into the new band
            let folded: Vec<TonePrediction> = tones
                .iter()
                .map(|t| {
                    let f = (t.frequency - (t.frequency / rout).round() * rout).abs();
                    TonePrediction { frequency: f, ..*t }
                })
                .collect();
            tones.clear();
            for t in folded {
                push_unique(&mut tones, t, nyquist);
            }
        }
        if layer.spec.upsample_factor() > 1 {
            let existing = tones.clone();
            for t in &existing {
                let mut m = 1.0;
                while m * rin - t.frequency <= nyquist + SAME_HZ {
                    for f in [m * rin - t.frequency, m * rin + t.frequency] {
                        let kind = match t.kind {
                            ToneKind::OffsetReplica => ToneKind::OffsetReplica,
                            _ => ToneKind::Replica,
                        };
                        push_unique(
                            &mut tones,
                            TonePrediction {
                                frequency: f.abs(),
                                origin_layer: t.origin_layer,
                                kind,
                            },
                            nyquist,
                        );
                    }
                    m += 1.0;
                }
            }
            if has_weight_periodicity(layer) {
                push_unique(
                    &mut tones,
                    TonePrediction {
                        frequency: rout / layer.spec.upsample_factor() as f64,
                        origin_layer: k,
                        kind: ToneKind::Direct,
                    },
                    nyquist,
                );
                if offset_present {
                    let mut m = 1.0;
                    while m * rin <= nyquist + SAME_HZ {
                        push_unique(
                            &mut tones,
                            TonePrediction {
                                frequency: m * rin,
                                origin_layer: k,
                                kind: ToneKind::OffsetReplica,
                            },
                            nyquist,
                        );
                        m += 1.0;
                    }
                }
            }
        }
        offset_present |= introduces_offset(layer);
    }
    tones
}

/// Distinct predicted frequencies in ascending order.
pub fn unique_frequencies(tones: &[TonePrediction]) -> Vec<f64> {
    let mut f: Vec<f64> = tones.iter().map(|t| t.frequency).collect();
    f.sort_by(f64::total_cmp);
    f.dedup_by(|a, b| (*a - *b).abs() < SAME_HZ);
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::{LayerSpec, StackSpec};
    use crate::ops::InterpMode;

    fn freqs(layers: Vec<LayerSpec>, rate: u32) -> Vec<f64> {
        unique_frequencies(&predict_tones(
            &Stack::build(StackSpec::new(rate, 0, layers)).unwrap(),
        ))
    }

    #[test]
    fn three_x2_layers_from_4k() {
        let f = freqs(vec![LayerSpec::transposed(4, 2); 3], 4000);
        assert_eq!(f, vec![4000.0, 8000.0, 12000.0, 16000.0]);
        let f = freqs(vec![LayerSpec::subpixel(2, 3); 3], 4000);
        assert_eq!(f, vec![4000.0, 8000.0, 12000.0, 16000.0]);
    }

    #[test]
    fn single_layer() {
        assert_eq!(freqs(vec![LayerSpec::transposed(4, 2)], 4000), vec![4000.0]);
    }

    #[test]
    fn no_upsampling_no_tones() {
        assert!(freqs(vec![], 4000).is_empty());
        assert!(freqs(vec![LayerSpec::plain_conv(3, 1)], 4000).is_empty());
    }

    #[test]
    fn interpolation_layers_only_carry_images() {
        assert!(freqs(vec![LayerSpec::nearest(2); 3], 4000).is_empty());
        let f = freqs(
            vec![
                LayerSpec::transposed(4, 2),
                LayerSpec::interp_plus_conv(InterpMode::Linear, 2, 9),
            ],
            4000,
        );
        assert_eq!(f, vec![4000.0]);
    }

    #[test]
    fn stride_four_stack() {
        let f = freqs(vec![LayerSpec::transposed(8, 4); 2], 1000);
        assert_eq!(f, vec![1000.0, 3000.0, 4000.0, 5000.0, 7000.0]);
    }

    #[test]
    fn offsets_add_replicas_in_later_layers() {
        let biased = vec![
            LayerSpec::transposed(8, 4).with_bias(Some(0.1)),
            LayerSpec::transposed(8, 4),
        ];
        let tones = predict_tones(&Stack::build(StackSpec::new(1000, 0, biased)).unwrap());
        let offsets: Vec<f64> = tones
            .iter()
            .filter(|t| t.kind == ToneKind::OffsetReplica)
            .map(|t| t.frequency)
            .collect();
        assert_eq!(offsets, vec![4000.0, 8000.0]);
    }

    #[test]
    fn structure_only() {
        use crate::layer::Init;
        let a = freqs(vec![LayerSpec::transposed(8, 4); 3], 1000);
        let b = freqs(
            vec![LayerSpec::transposed(8, 4).with_init(Init::Constant { value: 0.3 }); 3],
            1000,
        );
        assert_eq!(a, b);
    }
}
