use brownian_marble::exec::Executor;
use brownian_marble::marble::{
    extract_bubbles, simulate_marble, BubbleSet, EventKind, MarbleConfig, MarbleEvent, MarbleTrace, ParticleFront,
};
use brownian_marble::rbessel::RateFunction;
use brownian_marble::render::{
    bubble_color, encode_ppm, read_ppm, render_marble, write_ppm, Viewport, BACKGROUND, FRAGMENT, PATH,
};
use brownian_marble::stochastics::{tags, RngStream, TimeGrid};
use brownian_marble::vein::{Bubble, DeathKind};

fn two_paths() -> (MarbleTrace, BubbleSet) {
    let front = |t: f64| ParticleFront {
        time: t,
        positions: vec![0.25, 0.75],
        ids: vec![0, 1],
        gap_ids: vec![0],
    };
    let trace = MarbleTrace {
        config: MarbleConfig::new(RateFunction::constant(0.0), (0.0, 1.0), 1.0, 0.1),
        grid: TimeGrid::new(0.0, 1.0, 2).unwrap(),
        fronts: vec![front(0.0), front(0.5), front(1.0)],
        events: vec![MarbleEvent {
            kind: EventKind::Fragment,
            time: 0.5,
            lower: 0.25,
            upper: 0.75,
        }],
        fragmentation_count: 1,
        bubbles: vec![],
        seed: 0,
        stream_id: 0,
    };
    let bubbles = BubbleSet {
        bubbles: vec![Bubble {
            sigma: 0.0,
            tau: 1.0,
            times: vec![0.0, 0.5, 1.0],
            lower: vec![0.25; 3],
            upper: vec![0.75; 3],
            death_kind: DeathKind::Censored,
        }],
    };
    (trace, bubbles)
}

#[test]
fn golden_two_paths_with_bubble_and_fragment() {
    let (trace, bubbles) = two_paths();
    let img = render_marble(&trace, &bubbles, Viewport::of(&trace), (4, 8), 5).unwrap();
    let fill = bubble_color(0, 5);
    // paths at x = 0.75 and 0.25 land in rows 2 and 6; the fragment is drawn in column 2
    let expect = |col: usize, row: usize| match (col, row) {
        (2, 2..=6) => FRAGMENT,
        (_, 2) | (_, 6) => PATH,
        (_, 3..=5) => fill,
        _ => BACKGROUND,
    };
    let mut golden = b"P6\n4 8\n255\n".to_vec();
    for row in 0..8 {
        for col in 0..4 {
            golden.extend_from_slice(&expect(col, row));
        }
    }
    assert_eq!(encode_ppm(&img).unwrap(), golden);
}

#[test]
fn ppm_file_round_trip() {
    let (trace, bubbles) = two_paths();
    let img = render_marble(&trace, &bubbles, Viewport::of(&trace), (9, 7), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.ppm");
    write_ppm(&img, &path).unwrap();
    assert_eq!(read_ppm(&path).unwrap(), img);
    std::fs::write(&path, b"P5\n1 1\n255\n\0").unwrap();
    assert!(read_ppm(&path).is_err());
}

#[test]
fn demo_render_is_byte_stable() {
    let mut cfg = MarbleConfig::new(RateFunction::truncated(3.0, 256.0), (0.0, 1.0), 0.2, 1e-3);
    cfg.record_every = 20;
    let frames: Vec<Vec<u8>> = Executor::Sequential.map(2, |_| {
        let tr = simulate_marble(&cfg, &mut RngStream::derive(1, tags::MARBLE, 0)).unwrap();
        let b = extract_bubbles(&tr).unwrap();
        encode_ppm(&render_marble(&tr, &b, Viewport::of(&tr), (200, 100), 1).unwrap()).unwrap()
    });
    assert_eq!(frames[0], frames[1]);
    assert!(frames[0].chunks(3).any(|p| p == FRAGMENT));
}
