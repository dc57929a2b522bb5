use super::*;
use crate::gnn::ModelConfig;
use crate::scene::{generate_random_scenario, RoomKind, WallSegment, XY};

fn square_room(s: &mut Scenario, side: f64) {
    let h = side / 2.0;
    let v = [[-h, -h], [h, -h], [h, h], [-h, h]];
    let walls: Vec<WallSegment> = (0..4)
        .map(|i| WallSegment {
            start: XY { x: v[i][0], y: v[i][1] },
            end: XY {
                x: v[(i + 1) % 4][0],
                y: v[(i + 1) % 4][1],
            },
        })
        .collect();
    for snap in &mut s.snapshots {
        snap.walls = walls.clone();
    }
}

fn model(seed: u64) -> GnnStack {
    let mut cfg = ModelConfig::reference();
    cfg.widths = vec![12, 6];
    GnnStack::new(cfg, seed).unwrap()
}

#[test]
fn six_metre_room_gives_25_by_25() {
    let mut s = generate_random_scenario(1, 0, 0, RoomKind::Rectangular);
    square_room(&mut s, 6.0);
    let poly = s.snapshots[0].room_polygon();
    let l = GridLayout::covering(&poly, 0.25);
    assert_eq!((l.rows, l.cols), (25, 25));
    assert_eq!(l.centre(24, 24), [3.0, 3.0]);
    assert_eq!(l.locate([-3.0, 3.0]), Some((24, 0)));
    assert_eq!(l.locate([-2.9, 3.0]), None);
    assert_eq!(l.locate([3.25, 0.0]), None);
}

#[test]
fn l_room_marks_cut_corner_outside() {
    let s = generate_random_scenario(4, 2, 1, RoomKind::LShaped);
    let spec = SweepSpec::new(Question::Q1, 0.5);
    let grid = sweep(&model(0), &s, &spec).unwrap();
    let poly = s.snapshots.last().unwrap().room_polygon();
    let l = grid.layout;
    let mut outside = 0;
    for r in 0..l.rows {
        for c in 0..l.cols {
            let inside = point_in_polygon(l.centre(r, c), &poly);
            assert_eq!(grid.get(r, c).is_some(), inside);
            outside += usize::from(!inside);
        }
    }
    assert!(outside > 0);
    assert!(grid.scores().all(|v| v > 0.0 && v < 1.0));
}

#[test]
fn sweep_is_deterministic_and_matches_sequential_scoring() {
    let s = generate_random_scenario(9, 3, 1, RoomKind::Rectangular);
    let mut spec = SweepSpec::new(Question::Q2, 0.5);
    spec.action = Command { adv: 0.4, rot: 0.1 };
    let m = model(5);
    let a = sweep(&m, &s, &spec).unwrap();
    let b = sweep(&m, &s, &spec).unwrap();
    assert_eq!(a, b);

    // Reverse visitation order, one pose at a time.
    let triple = select_frames(&s, 1.0).unwrap();
    let heading = triple.frames[2].robot.pose.theta;
    let l = a.layout;
    for r in (0..l.rows).rev() {
        for c in (0..l.cols).rev() {
            let Some(expected) = a.get(r, c) else { continue };
            let [x, y] = l.centre(r, c);
            let got = score_poses(&m, &triple, s.labels, &[Pose { x, y, theta: heading }], spec.action, spec.question)
                .unwrap();
            assert!((got[0] - expected).abs() <= 1e-12);
        }
    }
}

#[test]
fn placement_moves_only_the_robot() {
    let s = generate_random_scenario(2, 3, 2, RoomKind::Rectangular);
    let triple = select_frames(&s, 1.0).unwrap();
    let pose = Pose {
        x: 0.5,
        y: -0.5,
        theta: 1.0,
    };
    let action = Command { adv: 0.3, rot: 0.0 };
    let moved = place_robot(&triple, pose, action);
    for (a, b) in moved.frames.iter().zip(&triple.frames) {
        assert_eq!(a.robot.pose, pose);
        assert_eq!(a.robot.command, action);
        assert_eq!((&a.humans, &a.objects, &a.goal), (&b.humans, &b.objects, &b.goal));
    }
}

#[test]
fn invalid_specs_and_models_are_rejected() {
    let s = generate_random_scenario(0, 1, 0, RoomKind::Rectangular);
    let mut spec = SweepSpec::new(Question::Q1, 0.0);
    assert!(matches!(sweep(&model(0), &s, &spec), Err(HeatmapError::InvalidSpec(_))));
    spec.resolution = 0.5;
    spec.action.adv = f64::NAN;
    assert!(matches!(sweep(&model(0), &s, &spec), Err(HeatmapError::InvalidSpec(_))));
    spec.action.adv = 0.0;
    let mut cfg = ModelConfig::reference();
    cfg.input_dim = 10;
    let wrong = GnnStack::new(cfg, 0).unwrap();
    assert!(matches!(sweep(&wrong, &s, &spec), Err(HeatmapError::IncompatibleModel { .. })));
    assert_eq!("Q2".parse::<Question>().unwrap(), Question::Q2);
    assert!("q3".parse::<Question>().is_err());
}

fn bare_scene() -> (Snapshot, GridLayout) {
    let mut s = generate_random_scenario(1, 0, 0, RoomKind::Rectangular);
    square_room(&mut s, 6.0);
    let mut snap = s.snapshots.pop().unwrap();
    snap.goal.x = 2.5;
    snap.goal.y = 2.5;
    let layout = GridLayout::covering(&snap.room_polygon(), 0.25);
    (snap, layout)
}

#[test]
fn uniform_and_zero_grids_render_expected_colours() {
    let (snap, layout) = bare_scene();
    let mut grid = ScoreGrid::outside(layout);
    grid.cells.iter_mut().for_each(|c| *c = Some(1.0));
    let img = render(&grid, &snap, RenderOptions::default());
    assert_eq!(img.dimensions(), (200, 200));
    // Bottom-left cell, away from axes and goal.
    assert_eq!(img.get_pixel(3, 196), &Rgb([230, 230, 230]));
    // Axis through the origin crosses the image centre.
    assert_eq!(img.get_pixel(100, 2), &BLACK);
    assert_eq!(img.get_pixel(100, 6), &Rgb([230, 230, 230]));

    grid.set(0, 0, Some(0.0));
    grid.set(0, 1, Some(0.099));
    grid.set(0, 2, Some(0.5));
    let img = render(&grid, &snap, RenderOptions::default());
    for dy in 0..8 {
        for dx in 0..8 {
            assert_eq!(img.get_pixel(dx, 192 + dy), &RED);
        }
    }
    assert_eq!(img.get_pixel(12, 196), &RED);
    assert_eq!(img.get_pixel(20, 196), &Rgb([115, 115, 115]));
    assert_eq!(cell_colour(None), WHITE);
}

#[test]
fn overlays_use_entity_colours() {
    let s = generate_random_scenario(21, 2, 1, RoomKind::Rectangular);
    let mut snap = s.snapshots.last().unwrap().clone();
    snap.humans[0].pose = Pose {
        x: 0.0,
        y: 1.0,
        theta: 0.0,
    };
    snap.objects[0].pose.x = -1.0;
    snap.objects[0].pose.y = -1.0;
    let layout = GridLayout::covering(&snap.room_polygon(), 0.25);
    let mut grid = ScoreGrid::outside(layout);
    grid.cells.iter_mut().for_each(|c| *c = Some(0.8));
    let img = render(&grid, &snap, RenderOptions::default());
    let at = |p: Point| {
        let x = ((p[0] - layout.origin[0]) / 0.25 * 8.0 + 4.0).round() as u32;
        let y = ((layout.rows as f64 - 1.0 - (p[1] - layout.origin[1]) / 0.25) * 8.0 + 4.0).round() as u32;
        *img.get_pixel(x, y)
    };
    assert_eq!(at([-1.0, -1.0]), GREEN);
    // Heading 0 points along +y: the orientation tick sits above the centre.
    assert_eq!(at([0.0, 1.3]), BLUE);
    assert_eq!(at([0.0, 1.0 + 0.25]), BLUE);
}

#[test]
fn csv_round_trip_rerenders_identically() {
    let s = generate_random_scenario(33, 3, 1, RoomKind::LShaped);
    let grid = sweep(&model(2), &s, &SweepSpec::new(Question::Q1, 0.3)).unwrap();
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert!(text.starts_with("x,y,score\n"));
    assert_eq!(text.lines().count() - 1, grid.scores().count());

    let back = ScoreGrid::read_csv(csv.as_slice(), grid.layout).unwrap();
    assert_eq!(back, grid);
    let snap = s.snapshots.last().unwrap();
    let a = png_bytes(&render(&grid, snap, RenderOptions::default())).unwrap();
    let b = png_bytes(&render(&back, snap, RenderOptions::default())).unwrap();
    assert_eq!(a, b);

    let bad = "x,y,score\n0.1234,0.0,0.5\n";
    assert!(matches!(
        ScoreGrid::read_csv(bad.as_bytes(), grid.layout),
        Err(HeatmapError::GridMismatch(_))
    ));
}

#[test]
fn png_and_pgm_outputs() {
    let (snap, layout) = bare_scene();
    let mut grid = ScoreGrid::outside(layout);
    grid.set(3, 3, Some(0.7));
    let img = render(&grid, &snap, RenderOptions { pixels_per_cell: 4 });
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("h.png");
    let pgm = dir.path().join("h.pgm");
    save_image(&img, &png).unwrap();
    save_image(&img, &pgm).unwrap();
    assert_eq!(std::fs::read(&png).unwrap(), png_bytes(&img).unwrap());
    let raw = std::fs::read(&pgm).unwrap();
    assert!(raw.starts_with(b"P5"));
    assert_eq!(sidecar_csv(&png), dir.path().join("h.csv"));
}
