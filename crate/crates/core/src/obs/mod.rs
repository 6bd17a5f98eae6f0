//! Observation builders: kinematics for the policy; image, video and text
//! for the reward pipeline.

mod kinematics;
mod render;
mod text;
mod ttc;
mod video;

pub use kinematics::{build_kinematics, KinematicsObs, FEATURES};
pub use render::{
    render_frame, FrameImage, BACKGROUND, CRASHED_COLOR, EGO_COLOR, FRAME_SIZE, LANE_LINE, NPC_COLOR, SCALING,
};
pub use text::{
    describe_text, lane_change_sentence, no_collision_sentence, parse_text, same_lane_sentence, ParsedText,
    TextObs, DEFAULT_TTC_THRESHOLD,
};
pub use ttc::{bumper_gap, compute_ttc, LaneRelation, TtcEntry, TtcReport, ATTENTION_SECONDS, MIN_GAP};
pub use video::{stack_video, FrameBuffer, VideoClip, CLIP_LEN};
