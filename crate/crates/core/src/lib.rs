//! Segmentation and analysis of keystroke and gaze translation logs.

pub mod analytics;
pub mod config;
pub mod error;
pub mod gaze;
pub mod progression;
pub mod segmentation;
pub mod session;
pub mod simulator;
pub mod states;
pub mod stats;
pub mod styles;
pub mod thresholds;

pub use error::{Error, Result};
pub use segmentation::{segment, segment_with_thresholds, ActivityUnit, AuType, SegmentHierarchy, SegmentOptions};
pub use session::{parse_session, parse_session_str, serialize_session, FixationEvent, KeyAction, KeyEvent, Ms, Session, Window};
pub use thresholds::{derive_thresholds, FilterRule, ThresholdSet};
