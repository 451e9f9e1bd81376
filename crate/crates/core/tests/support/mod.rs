#![allow(dead_code)]

pub mod color_tracker;
pub mod features;
