use crate::obs::{FrameImage, VideoClip, CLIP_LEN, FRAME_SIZE};

use super::{EmbeddingError, EmbeddingVector};

/// Cells per side of the average-pooling grid.
pub const POOL_GRID: usize = 16;
pub const IMAGE_DIM: usize = POOL_GRID * POOL_GRID * 3;

/// 16×16 per-channel average pool, mean-centered and L2-normalized.
pub fn embed_image_ref(frame: &FrameImage) -> Result<EmbeddingVector, EmbeddingError> {
    EmbeddingVector::normalized(pooled_centered(frame)?)
}

fn pooled_centered(frame: &FrameImage) -> Result<Vec<f64>, EmbeddingError> {
    if frame.width() != FRAME_SIZE || frame.height() != FRAME_SIZE {
        return Err(EmbeddingError::Input(format!(
            "expected a {FRAME_SIZE}x{FRAME_SIZE} frame, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    let cell = FRAME_SIZE / POOL_GRID;
    let bytes = frame.as_bytes();
    let mut pooled = vec![0.0; IMAGE_DIM];
    for row in 0..FRAME_SIZE {
        let cell_row = row / cell;
        for col in 0..FRAME_SIZE {
            let base = ((cell_row * POOL_GRID) + col / cell) * 3;
            let px = (row * FRAME_SIZE + col) * 3;
            for ch in 0..3 {
                pooled[base + ch] += f64::from(bytes[px + ch]);
            }
        }
    }
    let area = (cell * cell) as f64;
    pooled.iter_mut().for_each(|v| *v /= area);
    let mean = pooled.iter().sum::<f64>() / IMAGE_DIM as f64;
    pooled.iter_mut().for_each(|v| *v -= mean);
    if pooled.iter().all(|v| v.abs() < 1e-12) {
        return Err(EmbeddingError::Input("uniform frame has no pooled structure".into()));
    }
    Ok(pooled)
}

/// Mean of the per-frame embeddings, re-normalized.
pub fn embed_video_ref(clip: &VideoClip) -> Result<EmbeddingVector, EmbeddingError> {
    if clip.len() != CLIP_LEN {
        return Err(EmbeddingError::Input(format!("expected {CLIP_LEN} frames, got {}", clip.len())));
    }
    let mut sum = vec![0.0; IMAGE_DIM];
    for frame in clip.frames() {
        let e = embed_image_ref(frame)?;
        sum.iter_mut().zip(e.as_slice()).for_each(|(s, v)| *s += v);
    }
    sum.iter_mut().for_each(|v| *v /= CLIP_LEN as f64);
    EmbeddingVector::normalized(sum)
}
