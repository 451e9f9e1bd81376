pub mod features;
pub mod filter;
pub mod histogram;
pub mod image;
pub mod sequence;
pub mod tracker;
pub mod ungm;
