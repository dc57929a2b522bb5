//! Robot-position sweeps over a recorded scene and their rendering.
//!
//! A sweep keeps the humans, objects and goal exactly as recorded and moves
//! only the robot: for every grid cell inside the room the robot is placed at
//! the cell centre in all three frames, with a fixed heading and command, and
//! the model scores the resulting graph.

use std::io::{Read, Write};
use std::path::Path;

use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_filled_circle_mut, draw_hollow_circle_mut, draw_line_segment_mut};
use serde::Deserialize;

use crate::geometry::{bounding_box, heading_vector, point_in_polygon, Point};
use crate::gnn::{GnnError, GnnStack};
use crate::graph::{batch_graphs, GraphError, SocialGraph, NODE_FEATURES};
use crate::scene::{select_frames, Command, FrameTriple, Labels, Pose, Scenario, ScenarioError, Snapshot};

/// Scores below this are drawn red.
pub const RED_THRESHOLD: f64 = 0.1;
/// Grey level of a score of 1.0; keeps scored cells distinct from the white outside.
const MAX_GREY: f64 = 230.0;
const SWEEP_BATCH: usize = 64;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const RED: Rgb<u8> = Rgb([255, 0, 0]);
const BLUE: Rgb<u8> = Rgb([0, 0, 255]);
const GREEN: Rgb<u8> = Rgb([0, 160, 0]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);

#[derive(Debug, thiserror::Error)]
pub enum HeatmapError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("model expects {found} input features, graphs provide {expected}")]
    IncompatibleModel { found: usize, expected: usize },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Question {
    Q1,
    Q2,
}

impl Question {
    pub fn index(self) -> usize {
        match self {
            Self::Q1 => 0,
            Self::Q2 => 1,
        }
    }
}

impl std::str::FromStr for Question {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(Self::Q1),
            "q2" => Ok(Self::Q2),
            other => Err(format!("unknown question `{other}` (expected q1 or q2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub question: Question,
    /// Command held fixed in every frame of every cell.
    pub action: Command,
    /// Metres per cell.
    pub resolution: f64,
    /// Robot heading for every cell; `None` keeps the recorded final heading.
    pub heading: Option<f64>,
    /// Frame spacing used to pick the three snapshots.
    pub spacing_s: f64,
}

impl SweepSpec {
    pub fn new(question: Question, resolution: f64) -> Self {
        Self {
            question,
            action: Command { adv: 0.0, rot: 0.0 },
            resolution,
            heading: None,
            spacing_s: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), HeatmapError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(HeatmapError::InvalidSpec("resolution must be positive".into()));
        }
        if !(self.action.adv.is_finite() && self.action.rot.is_finite()) {
            return Err(HeatmapError::InvalidSpec("action must be finite".into()));
        }
        if self.heading.is_some_and(|h| !h.is_finite()) {
            return Err(HeatmapError::InvalidSpec("heading must be finite".into()));
        }
        Ok(())
    }
}

/// Cell geometry: cell `(row, col)` is centred on
/// `origin + (col, row) * resolution`, row 0 being the lowest `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub origin: Point,
    pub resolution: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridLayout {
    /// Boundary-inclusive grid over the bounding box of `polygon`.
    pub fn covering(polygon: &[Point], resolution: f64) -> Self {
        let (lo, hi) = bounding_box(polygon);
        let count = |span: f64| (span / resolution + 1e-9).floor() as usize + 1;
        Self {
            origin: lo,
            resolution,
            rows: count(hi[1] - lo[1]),
            cols: count(hi[0] - lo[0]),
        }
    }

    pub fn centre(&self, row: usize, col: usize) -> Point {
        [
            self.origin[0] + col as f64 * self.resolution,
            self.origin[1] + row as f64 * self.resolution,
        ]
    }

    /// Cell whose centre is within a quarter cell of `p`.
    pub fn locate(&self, p: Point) -> Option<(usize, usize)> {
        let fc = (p[0] - self.origin[0]) / self.resolution;
        let fr = (p[1] - self.origin[1]) / self.resolution;
        let (c, r) = (fc.round(), fr.round());
        let on_grid = (fc - c).abs() < 0.25 && (fr - r).abs() < 0.25;
        (on_grid && c >= 0.0 && r >= 0.0 && (c as usize) < self.cols && (r as usize) < self.rows)
            .then(|| (r as usize, c as usize))
    }
}

/// Row-major scores; `None` marks cells outside the room.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGrid {
    pub layout: GridLayout,
    pub cells: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct CsvCell {
    x: f64,
    y: f64,
    score: f64,
}

impl ScoreGrid {
    pub fn outside(layout: GridLayout) -> Self {
        Self {
            layout,
            cells: vec![None; layout.rows * layout.cols],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.layout.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, score: Option<f64>) {
        self.cells[row * self.layout.cols + col] = score;
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().flatten().copied()
    }

    /// `x,y,score`, one line per in-room cell.
    pub fn write_csv(&self, writer: impl Write) -> Result<(), HeatmapError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "score"])?;
        for r in 0..self.layout.rows {
            for c in 0..self.layout.cols {
                if let Some(s) = self.get(r, c) {
                    let [x, y] = self.layout.centre(r, c);
                    w.write_record([x.to_string(), y.to_string(), s.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a grid written by [`ScoreGrid::write_csv`]; cells not listed are outside.
    pub fn read_csv(reader: impl Read, layout: GridLayout) -> Result<Self, HeatmapError> {
        let mut grid = Self::outside(layout);
        for row in csv::Reader::from_reader(reader).deserialize() {
            let cell: CsvCell = row?;
            let (r, c) = layout
                .locate([cell.x, cell.y])
                .ok_or_else(|| HeatmapError::GridMismatch(format!("({}, {}) is not a cell centre", cell.x, cell.y)))?;
            grid.set(r, c, Some(cell.score));
        }
        Ok(grid)
    }
}

/// The three frames with the robot placed at `pose` and driving `action`.
pub fn place_robot(triple: &FrameTriple, pose: Pose, action: Command) -> FrameTriple {
    let mut out = triple.clone();
    for f in &mut out.frames {
        f.robot.pose = pose;
        f.robot.command = action;
    }
    out
}

fn check_model(model: &GnnStack) -> Result<(), HeatmapError> {
    if model.config.input_dim != NODE_FEATURES {
        return Err(HeatmapError::IncompatibleModel {
            found: model.config.input_dim,
            expected: NODE_FEATURES,
        });
    }
    Ok(())
}

/// Scores each robot pose against the same frames, in order.
pub fn score_poses(
    model: &GnnStack,
    triple: &FrameTriple,
    labels: Labels,
    poses: &[Pose],
    action: Command,
    question: Question,
) -> Result<Vec<f64>, HeatmapError> {
    check_model(model)?;
    let mut out = Vec::with_capacity(poses.len());
    for chunk in poses.chunks(SWEEP_BATCH) {
        let graphs = chunk
            .iter()
            .map(|&p| SocialGraph::from_triple(&place_robot(triple, p, action), labels))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&SocialGraph> = graphs.iter().collect();
        let pred = model.predict(&batch_graphs(&refs)?)?;
        out.extend((0..chunk.len()).map(|i| pred.get(i, question.index())));
    }
    Ok(out)
}

/// Scores every in-room cell of the room's bounding-box grid.
///
/// Cells are evaluated in fixed batches spread over the available threads;
/// the result does not depend on the thread count.
pub fn sweep(model: &GnnStack, scenario: &Scenario, spec: &SweepSpec) -> Result<ScoreGrid, HeatmapError> {
    spec.validate()?;
    check_model(model)?;
    let triple = select_frames(scenario, spec.spacing_s)?;
    let last = &triple.frames[2];
    let polygon = last.room_polygon();
    let layout = GridLayout::covering(&polygon, spec.resolution);
    let heading = spec.heading.unwrap_or(last.robot.pose.theta);

    let cells: Vec<(usize, usize)> = (0..layout.rows)
        .flat_map(|r| (0..layout.cols).map(move |c| (r, c)))
        .filter(|&(r, c)| point_in_polygon(layout.centre(r, c), &polygon))
        .collect();
    let poses: Vec<Pose> = cells
        .iter()
        .map(|&(r, c)| {
            let [x, y] = layout.centre(r, c);
            Pose { x, y, theta: heading }
        })
        .collect();

    let chunks: Vec<&[Pose]> = poses.chunks(SWEEP_BATCH).collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(chunks.len().max(1));
    let mut results: Vec<Option<Result<Vec<f64>, HeatmapError>>> = (0..chunks.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (chunks, triple) = (&chunks, &triple);
                scope.spawn(move || {
                    (t..chunks.len())
                        .step_by(threads)
                        .map(|i| {
                            (i, score_poses(model, triple, scenario.labels, chunks[i], spec.action, spec.question))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });

    let mut grid = ScoreGrid::outside(layout);
    let mut cell_iter = cells.into_iter();
    for r in results {
        for score in r.expect("every chunk is scored")? {
            let (row, col) = cell_iter.next().expect("one score per cell");
            grid.set(row, col, Some(score));
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub pixels_per_cell: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { pixels_per_cell: 8 }
    }
}

/// Colour of one cell.
pub fn cell_colour(score: Option<f64>) -> Rgb<u8> {
    match score {
        None => WHITE,
        Some(s) if s < RED_THRESHOLD => RED,
        Some(s) => {
            let g = (s.clamp(0.0, 1.0) * MAX_GREY).round() as u8;
            Rgb([g, g, g])
        }
    }
}

/// Draws the grid with the scene overlaid: oriented blue circles for humans,
/// small green circles for objects, a wider green circle for the goal, red
/// lines for interactions and dashed axes through the world origin.
pub fn render(grid: &ScoreGrid, scene: &Snapshot, opts: RenderOptions) -> RgbImage {
    let l = grid.layout;
    let ppc = opts.pixels_per_cell.max(1);
    let (w, h) = (l.cols as u32 * ppc, l.rows as u32 * ppc);
    let mut img = RgbImage::from_pixel(w, h, WHITE);
    for r in 0..l.rows {
        for c in 0..l.cols {
            let colour = cell_colour(grid.get(r, c));
            let (x0, y0) = (c as u32 * ppc, (l.rows - 1 - r) as u32 * ppc);
            for dy in 0..ppc {
                for dx in 0..ppc {
                    img.put_pixel(x0 + dx, y0 + dy, colour);
                }
            }
        }
    }

    let scale = ppc as f64 / l.resolution;
    let to_px = |p: Point| -> (f32, f32) {
        let x = (p[0] - l.origin[0]) * scale + ppc as f64 / 2.0;
        let y = (l.rows as f64 - 1.0 - (p[1] - l.origin[1]) / l.resolution) * ppc as f64 + ppc as f64 / 2.0;
        (x as f32, y as f32)
    };
    let to_i = |p: (f32, f32)| (p.0.round() as i32, p.1.round() as i32);
    let px = |metres: f64| ((metres * scale).round() as i32).max(1);

    // Dashed axes through the world origin.
    let (ox, oy) = to_i(to_px([0.0, 0.0]));
    let dashed = |i: i32| i.rem_euclid(8) < 5;
    if (0..w as i32).contains(&ox) {
        for y in (0..h as i32).filter(|&y| dashed(y)) {
            img.put_pixel(ox as u32, y as u32, BLACK);
        }
    }
    if (0..h as i32).contains(&oy) {
        for x in (0..w as i32).filter(|&x| dashed(x)) {
            img.put_pixel(x as u32, oy as u32, BLACK);
        }
    }

    let position = |id| {
        scene
            .human(id)
            .map(|h| h.pose.position())
            .or_else(|| scene.object(id).map(|o| o.pose.position()))
    };
    for i in &scene.interactions {
        if let (Some(a), Some(b)) = (position(i.source), position(i.target)) {
            draw_line_segment_mut(&mut img, to_px(a), to_px(b), RED);
        }
    }
    for o in &scene.objects {
        draw_filled_circle_mut(&mut img, to_i(to_px(o.pose.position())), px(0.12), GREEN);
    }
    let goal = to_i(to_px(scene.goal.position()));
    let goal_r = px(0.4);
    draw_hollow_circle_mut(&mut img, goal, goal_r, GREEN);
    draw_hollow_circle_mut(&mut img, goal, (goal_r - 1).max(1), GREEN);
    for hu in &scene.humans {
        let p = hu.pose.position();
        let radius = 0.25;
        draw_hollow_circle_mut(&mut img, to_i(to_px(p)), px(radius), BLUE);
        let d = heading_vector(hu.pose.theta);
        let tip = [p[0] + d[0] * radius * 1.8, p[1] + d[1] * radius * 1.8];
        draw_line_segment_mut(&mut img, to_px(p), to_px(tip), BLUE);
    }
    img
}

/// Writes PNG, or binary PGM (greyscale) when the path ends in `.pgm`.
pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), HeatmapError> {
    let path = path.as_ref();
    let pgm = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if pgm {
        use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
        use image::ImageEncoder;
        let grey = image::DynamicImage::ImageRgb8(img.clone()).to_luma8();
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        PnmEncoder::new(file)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(grey.as_raw(), grey.width(), grey.height(), image::ExtendedColorType::L8)?;
    } else {
        img.save_with_format(path, image::ImageFormat::Png)?;
    }
    Ok(())
}

/// PNG bytes of an image.
pub fn png_bytes(img: &RgbImage) -> Result<Vec<u8>, HeatmapError> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Path of the CSV written next to a heatmap image.
pub fn sidecar_csv(image_path: &Path) -> std::path::PathBuf {
    image_path.with_extension("csv")
}

#[cfg(test)]
mod tests;
