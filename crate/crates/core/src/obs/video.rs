use std::collections::VecDeque;
use std::sync::Arc;

use super::FrameImage;

pub const CLIP_LEN: usize = 30;

/// Exactly [`CLIP_LEN`] frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Vec<Arc<FrameImage>>,
}

impl VideoClip {
    /// Arbitrary-length constructor; embedders check the length.
    pub fn from_frames(frames: Vec<Arc<FrameImage>>) -> Self {
        Self { frames }
    }

    pub fn frames(&self) -> &[Arc<FrameImage>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Sliding window over the most recent frames of an episode.
#[derive(Debug, Clone, Default)]
pub struct FrameBuffer {
    frames: VecDeque<Arc<FrameImage>>,
}

impl FrameBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, frame: FrameImage) {
        if self.frames.len() == CLIP_LEN {
            self.frames.pop_front();
        }
        self.frames.push_back(Arc::new(frame));
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The latest 30 frames, front-padded with the oldest one.
    pub fn clip(&self) -> Option<VideoClip> {
        let first = self.frames.front()?;
        let pad = CLIP_LEN - self.frames.len();
        let frames = std::iter::repeat_n(first, pad).chain(self.frames.iter()).cloned().collect();
        Some(VideoClip { frames })
    }
}

/// Append `current` to `history` and return the resulting clip.
pub fn stack_video(history: &mut FrameBuffer, current: FrameImage) -> VideoClip {
    history.push(current);
    history.clip().expect("buffer holds at least the current frame")
}
