mod common;

use common::{random_series, ref_get_phase, RefPhase};
use ponzi_core::phases::{get_cycle, get_phase, partition, ScanMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TRACE: [u64; 13] = [1, 1, 2, 3, 10, 100, 40, 9, 50, 8, 2, 1, 1];

#[test]
fn hand_traced_series() {
    let first = get_cycle(&TRACE, &[], None, 0, 12, ScanMode::Nearest).unwrap();
    assert_eq!(
        (
            first.peak_vol,
            first.peak_day,
            first.starts,
            first.ends,
            first.duration
        ),
        (100, 5, 4, 7, 3)
    );

    let p = get_phase(&TRACE, ScanMode::Nearest).unwrap();
    assert_eq!((p.starts, p.ends), (4, 9));
    let peaks: Vec<(u64, usize)> = p.cycles.iter().map(|c| (c.peak_vol, c.peak_day)).collect();
    assert_eq!(peaks, vec![(100, 5), (50, 8)]);

    let part = partition(&TRACE, ScanMode::Nearest).unwrap();
    assert_eq!(part.bootstrap, 0..4);
    assert_eq!(part.hyper_range(), 4..10);
    assert_eq!(part.collapse, 10..13);
}

#[test]
fn reference_agrees_on_hand_trace() {
    let want = RefPhase::of(&get_phase(&TRACE, ScanMode::Nearest).unwrap());
    assert_eq!(ref_get_phase(&TRACE), Some(want));
}

proptest! {
    #[test]
    fn matches_reference_transcription(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vols = random_series(&mut rng);
        let got = get_phase(&vols, ScanMode::Nearest).ok().map(|p| RefPhase::of(&p));
        prop_assert_eq!(got, ref_get_phase(&vols));
    }

    #[test]
    fn partition_is_ordered_and_exhaustive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vols = random_series(&mut rng);
        if let Ok(p) = partition(&vols, ScanMode::Nearest) {
            let h = p.hyper_range();
            prop_assert_eq!(p.bootstrap.start, 0);
            prop_assert_eq!(p.bootstrap.end, h.start);
            prop_assert_eq!(h.end, p.collapse.start);
            prop_assert_eq!(p.collapse.end, vols.len());
            for w in p.hyperoperation.cycles.windows(2) {
                prop_assert!(w[0].peak_day < w[1].peak_day);
                prop_assert!(w[0].ends <= w[1].starts);
            }
        }
    }
}
