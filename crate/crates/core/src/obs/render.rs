use std::path::Path;

use crate::sim::{Footprint, VehicleState, WorldState};

pub const FRAME_SIZE: usize = 224;
/// Pixels per meter.
pub const SCALING: f64 = 10.0;

pub const BACKGROUND: [u8; 3] = [30, 30, 30];
pub const LANE_LINE: [u8; 3] = [90, 90, 90];
pub const EGO_COLOR: [u8; 3] = [255, 255, 255];
pub const NPC_COLOR: [u8; 3] = [40, 90, 230];
pub const CRASHED_COLOR: [u8; 3] = [220, 30, 30];

/// 224×224 RGB frame, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl FrameImage {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let data = color.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Option<Self> {
        (data.len() == width * height * 3).then_some(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, col: usize, row: usize, color: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    pub fn count_color(&self, color: [u8; 3]) -> usize {
        self.data.chunks_exact(3).filter(|p| *p == color).count()
    }

    /// Channel-wise `255 - v`.
    pub fn inverted(&self) -> Self {
        Self { data: self.data.iter().map(|v| 255 - v).collect(), ..self.clone() }
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, image::ImageError> {
        let mut out = std::io::Cursor::new(Vec::new());
        image::write_buffer_with_format(
            &mut out,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )?;
        Ok(out.into_inner())
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, image::ImageError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self { width: w as usize, height: h as usize, data: img.into_raw() })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), image::ImageError> {
        image::save_buffer(path, &self.data, self.width as u32, self.height as u32, image::ExtendedColorType::Rgb8)
    }

    pub fn load_png(path: &Path) -> Result<Self, image::ImageError> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self { width: w as usize, height: h as usize, data: img.into_raw() })
    }
}

/// Top-down view centered on the ego: faint lane lines, npcs in blue
/// (red once crashed) and the ego in white on top.
pub fn render_frame(world: &WorldState) -> FrameImage {
    let config = &world.config;
    let ego = world.ego();
    let mut frame = FrameImage::filled(FRAME_SIZE, FRAME_SIZE, BACKGROUND);
    let half = FRAME_SIZE as f64 / 2.0;
    let row_y = |row: usize| ego.y + (row as f64 + 0.5 - half) / SCALING;
    let col_x = |col: usize| ego.x + (col as f64 + 0.5 - half) / SCALING;

    // lane boundaries at (k - 1/2) lane widths
    let pixel = 1.0 / SCALING;
    for row in 0..FRAME_SIZE {
        let y = row_y(row);
        let on_line = (0..=config.lane_count).any(|k| {
            let boundary = (k as f64 - 0.5) * config.lane_width;
            (y - boundary).abs() < pixel / 2.0
        });
        if on_line {
            for col in 0..FRAME_SIZE {
                frame.put(col, row, LANE_LINE);
            }
        }
    }

    let draw = |frame: &mut FrameImage, v: &VehicleState, color: [u8; 3]| {
        let fp = Footprint::of(v, config.vehicle_length, config.vehicle_width);
        let reach = (config.vehicle_length.hypot(config.vehicle_width) / 2.0) * SCALING;
        let cu = (v.x - ego.x) * SCALING + half;
        let cv = (v.y - ego.y) * SCALING + half;
        let lo = |c: f64| (c - reach).floor().max(0.0) as usize;
        let hi = |c: f64| ((c + reach).ceil().max(0.0) as usize).min(FRAME_SIZE);
        for row in lo(cv)..hi(cv) {
            for col in lo(cu)..hi(cu) {
                if fp.contains(col_x(col), row_y(row)) {
                    frame.put(col, row, color);
                }
            }
        }
    };
    for v in world.npcs() {
        let color = if v.crashed { CRASHED_COLOR } else { NPC_COLOR };
        draw(&mut frame, v, color);
    }
    draw(&mut frame, ego, EGO_COLOR);
    frame
}
