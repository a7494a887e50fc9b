//! Deterministic test pages: one HTML document with a font, a stylesheet, a
//! script and `N` images of pseudo-random bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use burst_core::ObjectRef;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::BenchError;

pub const KIB: u64 = 1024;
pub const FONT_SIZE: u64 = 44 * KIB;
pub const CSS_SIZE: u64 = 120 * KIB;
pub const JS_SIZE: u64 = 84 * KIB;
pub const DEFAULT_IMAGE_SIZE: u64 = 30 * KIB;
pub const DEFAULT_SEED: u64 = 0x4255_5253_5400_0001;

const FONT_PATH: &str = "/font.woff2";
const CSS_PATH: &str = "/style.css";
const JS_PATH: &str = "/jquery.js";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureConfig {
    pub image_count: usize,
    pub image_size: u64,
    pub font_size: u64,
    pub css_size: u64,
    pub js_size: u64,
    pub seed: u64,
}

impl FixtureConfig {
    pub fn new(image_count: usize) -> Self {
        Self {
            image_count,
            image_size: DEFAULT_IMAGE_SIZE,
            font_size: FONT_SIZE,
            css_size: CSS_SIZE,
            js_size: JS_SIZE,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_image_size(mut self, bytes: u64) -> Self {
        self.image_size = bytes;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), BenchError> {
        if [self.image_size, self.font_size, self.css_size, self.js_size].contains(&0) {
            return Err(BenchError::Config("object sizes must be positive"));
        }
        Ok(())
    }
}

/// A generated docroot and what the client needs to know about it.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub root: PathBuf,
    /// Page name for every generated HTML document, keyed by image count.
    pub pages: Vec<(usize, ObjectRef)>,
    /// Size of every object any page references.
    pub sizes: HashMap<ObjectRef, u64>,
}

impl Fixture {
    pub fn page(&self, image_count: usize) -> Option<&ObjectRef> {
        self.pages.iter().find(|(n, _)| *n == image_count).map(|(_, p)| p)
    }

    /// Size hints for exactly the objects referenced by the page with
    /// `image_count` images.
    pub fn size_hints(&self, image_count: usize) -> HashMap<ObjectRef, u64> {
        page_objects(image_count)
            .into_iter()
            .filter_map(|o| self.sizes.get(&o).map(|&s| (o, s)))
            .collect()
    }
}

pub fn image_path(index: usize) -> String {
    format!("/img/img{index:04}.jpg")
}

/// Objects referenced by a page with `image_count` images, in page order.
pub fn page_objects(image_count: usize) -> Vec<ObjectRef> {
    [FONT_PATH, CSS_PATH, JS_PATH]
        .into_iter()
        .map(String::from)
        .chain((1..=image_count).map(image_path))
        .map(|p| ObjectRef::new(&p).expect("fixture paths are valid"))
        .collect()
}

pub fn page_html(image_count: usize) -> String {
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(html, "<title>{image_count} images</title>");
    let _ = writeln!(
        html,
        "<link rel=\"preload\" href=\"{FONT_PATH}\" as=\"font\" type=\"font/woff2\" crossorigin>"
    );
    let _ = writeln!(html, "<link rel=\"stylesheet\" href=\"{CSS_PATH}\">");
    let _ = writeln!(html, "<script src=\"{JS_PATH}\"></script>");
    html.push_str("</head>\n<body>\n");
    for i in 1..=image_count {
        let _ = writeln!(html, "<img src=\"{}\" alt=\"\">", image_path(i));
    }
    html.push_str("</body>\n</html>\n");
    html
}

/// Writes `index.html` plus its objects into `dir`.
pub fn generate_fixture(config: &FixtureConfig, dir: &Path) -> Result<Fixture, BenchError> {
    generate_pages(config, &[config.image_count], dir, |_| "/index.html".to_owned())
}

/// Writes one page per entry of `image_counts` (`/page-<N>.html`) sharing a
/// single set of objects sized for the largest page.
pub fn generate_experiment_fixture(
    config: &FixtureConfig,
    image_counts: &[usize],
    dir: &Path,
) -> Result<Fixture, BenchError> {
    generate_pages(config, image_counts, dir, |n| format!("/page-{n}.html"))
}

fn generate_pages(
    config: &FixtureConfig,
    image_counts: &[usize],
    dir: &Path,
    page_name: impl Fn(usize) -> String,
) -> Result<Fixture, BenchError> {
    config.validate()?;
    let max_images = image_counts.iter().copied().max().unwrap_or(0);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchError::Fixture { path, source }
    };
    fs::create_dir_all(dir.join("img")).map_err(io(&dir.join("img")))?;

    let mut objects = vec![
        (FONT_PATH.to_owned(), config.font_size),
        (CSS_PATH.to_owned(), config.css_size),
        (JS_PATH.to_owned(), config.js_size),
    ];
    objects.extend((1..=max_images).map(|i| (image_path(i), config.image_size)));

    let mut sizes = HashMap::with_capacity(objects.len());
    for (stream, (path, size)) in objects.into_iter().enumerate() {
        let file = dir.join(path.trim_start_matches('/'));
        // One ChaCha stream per object, so an object's bytes do not depend
        // on how many others are generated.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream as u64);
        let mut bytes = vec![0u8; size as usize];
        rng.fill_bytes(&mut bytes);
        fs::write(&file, &bytes).map_err(io(&file))?;
        sizes.insert(ObjectRef::new(&path).expect("fixture paths are valid"), size);
    }

    let mut pages = Vec::with_capacity(image_counts.len());
    for &n in image_counts {
        let name = page_name(n);
        let file = dir.join(name.trim_start_matches('/'));
        fs::write(&file, page_html(n)).map_err(io(&file))?;
        pages.push((n, ObjectRef::new(&name).expect("page names are valid")));
    }
    Ok(Fixture {
        root: dir.to_path_buf(),
        pages,
        sizes,
    })
}
