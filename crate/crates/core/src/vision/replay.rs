//! CSV detection streams: `frame,class,cx,cy,w,h`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BoxDetection, DetectionClass, VisionError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub frame: u64,
    pub class: DetectionClass,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl DetectionRow {
    pub fn detection(&self) -> BoxDetection {
        BoxDetection::new(self.cx, self.cy, self.w, self.h)
    }
}

pub fn read_detections<R: Read>(reader: R) -> Result<Vec<DetectionRow>, VisionError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(VisionError::from)).collect()
}

pub fn write_detections<W: Write>(writer: W, rows: &[DetectionRow]) -> Result<(), VisionError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Groups rows into per-frame detection lists of one class, frames in order.
/// Frames with no rows of that class yield empty lists.
pub fn frames_of(rows: &[DetectionRow], class: DetectionClass) -> Vec<Vec<BoxDetection>> {
    let Some(last) = rows.iter().map(|r| r.frame).max() else {
        return Vec::new();
    };
    let mut out = vec![Vec::new(); last as usize + 1];
    for r in rows.iter().filter(|r| r.class == class) {
        out[r.frame as usize].push(r.detection());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::{BoxTracker, TrackerConfig};

    #[test]
    fn round_trip_and_replay() {
        let rows: Vec<DetectionRow> = (0..20)
            .flat_map(|f| {
                [
                    DetectionRow {
                        frame: f,
                        class: DetectionClass::Uav,
                        cx: 100.0 + 3.0 * f as f64,
                        cy: 80.0,
                        w: 60.0,
                        h: 20.0,
                    },
                    DetectionRow {
                        frame: f,
                        class: DetectionClass::Ball,
                        cx: 500.0,
                        cy: 400.0 - f as f64,
                        w: 8.0,
                        h: 8.0,
                    },
                ]
            })
            .collect();
        let mut buf = Vec::new();
        write_detections(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("frame,class,cx,cy,w,h"));
        let back = read_detections(buf.as_slice()).unwrap();
        assert_eq!(back, rows);

        let mut tr = BoxTracker::new(TrackerConfig::default());
        for dets in frames_of(&back, DetectionClass::Uav) {
            tr.step(&dets);
        }
        assert_eq!(tr.tracks().len(), 1);
        assert!((tr.tracks()[0].velocity()[0] - 3.0).abs() < 0.15);
    }

    #[test]
    fn bad_class_is_an_error() {
        let text = "frame,class,cx,cy,w,h\n0,car,1,2,3,4\n";
        assert!(read_detections(text.as_bytes()).is_err());
    }
}
