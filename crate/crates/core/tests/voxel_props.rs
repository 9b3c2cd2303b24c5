use proptest::prelude::*;

use evsynth::event::{Event, EventStream, Polarity};
use evsynth::pipeline::{build_parts, PipelineConfig};
use evsynth::voxel::{density, temporal_kernel, valid_mask, voxelize};

fn arb_stream() -> impl Strategy<Value = EventStream> {
    (1u32..12, 1u32..12, 1i64..10_000).prop_flat_map(|(w, h, span)| {
        prop::collection::vec((0..w as u16, 0..h as u16, 0..=span, any::<bool>()), 0..300).prop_map(move |evs| {
            let events = evs
                .into_iter()
                .map(|(x, y, t, on)| Event::new(x, y, t, if on { Polarity::On } else { Polarity::Off }))
                .collect();
            EventStream::from_unsorted(events, w, h, 0, span)
        })
    })
}

proptest! {
    #[test]
    fn kernel_weights_sum_to_one(bins in 2usize..12, u in 0.0f64..=1.0) {
        let s = u * (bins - 1) as f64;
        let total: f64 = (0..bins).map(|b| temporal_kernel(b, s)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn voxel_mass_equals_polarity_sum(stream in arb_stream(), bins in 2usize..8) {
        let g = voxelize(&stream, stream.t_start, stream.t_end, bins).unwrap();
        let total: f64 = g.values().iter().sum();
        let expected: f64 = stream.events.iter().map(|e| e.p.as_f64()).sum();
        prop_assert!((total - expected).abs() < 1e-9);
    }

    #[test]
    fn density_is_mean_of_valid_mask(stream in arb_stream(), bins in 2usize..8) {
        let g = voxelize(&stream, stream.t_start, stream.t_end, bins).unwrap();
        let mask = valid_mask(&g);
        let active = mask.as_slice().iter().filter(|&&m| m).count();
        prop_assert_eq!(density(&g).get(), active as f64 / mask.as_slice().len() as f64);
    }

    #[test]
    fn voxelizing_is_order_independent_within_a_window(stream in arb_stream()) {
        let mut rev = stream.clone();
        rev.events.reverse();
        let a = voxelize(&stream, stream.t_start, stream.t_end, 5).unwrap();
        let b = voxelize(&rev, rev.t_start, rev.t_end, 5).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn density_does_not_increase_with_threshold() {
    let cfg = PipelineConfig {
        width: 48,
        height: 36,
        samples: 4,
        ..PipelineConfig::default()
    };
    let k = cfg.intrinsics_for().unwrap();
    for i in 0..cfg.samples {
        for parts in build_parts(&cfg, &k, i).unwrap() {
            let d: Vec<[f64; 2]> = parts
                .events
                .iter()
                .map(|te| {
                    let f = |s: &EventStream| density(&voxelize(s, s.t_start, s.t_end, 5).unwrap()).get();
                    [f(&te.prev), f(&te.next)]
                })
                .collect();
            for w in d.windows(2) {
                assert!(w[1][0] <= w[0][0] && w[1][1] <= w[0][1], "{}: {d:?}", parts.id);
            }
        }
    }
}
