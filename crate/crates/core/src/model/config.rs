use std::fmt;

use super::{ModelError, Result};

/// Which encoder stack to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Backbone LISTA, then per layer: attention half, LISTA block and the
    /// weighted fusion MLP.
    ListaTransformer,
    /// Pre-norm ViT encoder without any LISTA components.
    Transformer,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::ListaTransformer => "lista-transformer",
            Architecture::Transformer => "transformer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lista-transformer" => Some(Architecture::ListaTransformer),
            "transformer" => Some(Architecture::Transformer),
            _ => None,
        }
    }

    pub fn has_lista(self) -> bool {
        self == Architecture::ListaTransformer
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub channels: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub backbone_iters: usize,
    pub num_classes: usize,
    pub architecture: Architecture,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_size: 32,
            patch_size: 8,
            channels: 1,
            embed_dim: 64,
            hidden_dim: 128,
            num_layers: 2,
            num_heads: 2,
            backbone_iters: 7,
            num_classes: 4,
            architecture: Architecture::ListaTransformer,
        }
    }
}

impl ModelConfig {
    /// 8×8 image, 4×4 patches, width 8, one layer, one head. Small enough
    /// for finite-difference checks of the whole network.
    pub fn micro() -> Self {
        Self {
            image_size: 8,
            patch_size: 4,
            channels: 1,
            embed_dim: 8,
            hidden_dim: 16,
            num_layers: 1,
            num_heads: 1,
            backbone_iters: 7,
            num_classes: 4,
            architecture: Architecture::ListaTransformer,
        }
    }

    pub fn with_architecture(self, architecture: Architecture) -> Self {
        Self { architecture, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("image_size", self.image_size),
            ("patch_size", self.patch_size),
            ("channels", self.channels),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("num_classes", self.num_classes),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
        }
        if self.architecture.has_lista() && self.backbone_iters == 0 {
            return Err(ModelError::InvalidConfig("backbone_iters must be positive".into()));
        }
        if self.image_size % self.patch_size != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "image_size {} is not divisible by patch_size {}",
                self.image_size, self.patch_size
            )));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn num_patches(&self) -> usize {
        self.patches_per_side().pow(2)
    }

    /// Patches plus the class token.
    pub fn num_tokens(&self) -> usize {
        self.num_patches() + 1
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    /// `key = value` lines, one per field, used by checkpoint headers and
    /// config echoes.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("architecture", self.architecture.name().to_string()),
            ("image_size", self.image_size.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("channels", self.channels.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("num_layers", self.num_layers.to_string()),
            ("num_heads", self.num_heads.to_string()),
            ("backbone_iters", self.backbone_iters.to_string()),
            ("num_classes", self.num_classes.to_string()),
        ]
    }

    /// Applies one `key = value` setting. Returns `Ok(false)` when the key is
    /// not a model field.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        if key == "architecture" {
            self.architecture = Architecture::parse(value)
                .ok_or_else(|| ModelError::InvalidConfig(format!("unknown architecture {value:?}")))?;
            return Ok(true);
        }
        let slot = match key {
            "image_size" => &mut self.image_size,
            "patch_size" => &mut self.patch_size,
            "channels" => &mut self.channels,
            "embed_dim" => &mut self.embed_dim,
            "hidden_dim" => &mut self.hidden_dim,
            "num_layers" => &mut self.num_layers,
            "num_heads" => &mut self.num_heads,
            "backbone_iters" => &mut self.backbone_iters,
            "num_classes" => &mut self.num_classes,
            _ => return Ok(false),
        };
        *slot = value
            .parse()
            .map_err(|_| ModelError::InvalidConfig(format!("{key}: expected a non-negative integer, got {value:?}")))?;
        Ok(true)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}
