//! Recording and event formats plus the session preprocessing chain.

pub mod events;
pub mod preprocess;
pub mod recording;

pub use events::{load_events, rasterize_labels, rasterize_range, save_events, EventTrack, Interval, LabelVector};
pub use preprocess::{normalize_temporal, preprocess_session, resample, select_channels};
pub use recording::{load_recording, save_recording, ChannelKind, ChannelMeta, Recording};
