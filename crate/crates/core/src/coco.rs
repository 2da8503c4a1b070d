//! COCO-style detection annotations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    /// Scene identity used for scene-disjoint splits (not part of core COCO).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    /// `[x, y, width, height]` in pixels.
    pub bbox: [f64; 4],
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
}

impl CocoAnnotation {
    /// Integer box covering the stored extent.
    pub fn to_bbox(&self) -> Option<BBox> {
        let [x, y, w, h] = self.bbox;
        let (x0, y0) = (x.floor(), y.floor());
        BBox::new(x0 as i32, y0 as i32, ((x + w).ceil() - x0) as u32, ((y + h).ceil() - y0) as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u32,
    pub name: String,
    #[serde(default)]
    pub supercategory: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

impl CocoDataset {
    pub fn annotations_for(&self, image_id: u64) -> impl Iterator<Item = &CocoAnnotation> {
        self.annotations.iter().filter(move |a| a.image_id == image_id)
    }
}

/// Checks the detection schema: required keys and types, unique ids,
/// four-element boxes with positive size, positive areas and valid references.
/// Returns every problem found.
pub fn validate_coco_json(v: &Value) -> Result<(), Vec<String>> {
    let mut errs = Vec::new();
    let list = |key: &str, errs: &mut Vec<String>| -> Vec<Value> {
        match v.get(key).and_then(Value::as_array) {
            Some(a) => a.clone(),
            None => {
                errs.push(format!("missing array `{key}`"));
                Vec::new()
            }
        }
    };
    let images = list("images", &mut errs);
    let annotations = list("annotations", &mut errs);
    let categories = list("categories", &mut errs);

    let ids = |items: &[Value], what: &str, errs: &mut Vec<String>| -> BTreeSet<u64> {
        let mut seen = BTreeSet::new();
        for (i, item) in items.iter().enumerate() {
            match item.get("id").and_then(Value::as_u64) {
                Some(id) if seen.insert(id) => {}
                Some(id) => errs.push(format!("{what}[{i}]: duplicate id {id}")),
                None => errs.push(format!("{what}[{i}]: missing integer id")),
            }
        }
        seen
    };
    let image_ids = ids(&images, "images", &mut errs);
    ids(&annotations, "annotations", &mut errs);
    let category_ids = ids(&categories, "categories", &mut errs);

    for (i, im) in images.iter().enumerate() {
        if im.get("file_name").and_then(Value::as_str).is_none() {
            errs.push(format!("images[{i}]: missing file_name"));
        }
        for k in ["width", "height"] {
            if !im.get(k).and_then(Value::as_u64).is_some_and(|d| d > 0) {
                errs.push(format!("images[{i}]: {k} must be a positive integer"));
            }
        }
    }
    for (i, c) in categories.iter().enumerate() {
        if c.get("name").and_then(Value::as_str).is_none() {
            errs.push(format!("categories[{i}]: missing name"));
        }
    }
    for (i, a) in annotations.iter().enumerate() {
        match a.get("image_id").and_then(Value::as_u64) {
            Some(id) if image_ids.contains(&id) => {}
            _ => errs.push(format!("annotations[{i}]: image_id does not reference an image")),
        }
        match a.get("category_id").and_then(Value::as_u64) {
            Some(id) if category_ids.contains(&id) => {}
            _ => errs.push(format!("annotations[{i}]: category_id does not reference a category")),
        }
        let bbox: Option<Vec<f64>> = a.get("bbox").and_then(Value::as_array).map(|b| b.iter().filter_map(Value::as_f64).collect());
        match bbox {
            Some(b) if b.len() == 4 && b[2] > 0.0 && b[3] > 0.0 => {}
            _ => errs.push(format!("annotations[{i}]: bbox must be [x, y, w, h] with w, h > 0")),
        }
        if !a.get("area").and_then(Value::as_f64).is_some_and(|x| x > 0.0) {
            errs.push(format!("annotations[{i}]: area must be positive"));
        }
        if a.get("iscrowd").and_then(Value::as_u64).is_none() {
            errs.push(format!("annotations[{i}]: missing iscrowd"));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}
