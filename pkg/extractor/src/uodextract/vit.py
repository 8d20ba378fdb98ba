"""ViT-S/16 backbone with access to the last attention layer's keys.

The module mirrors the standard self-distilled ViT checkpoint layout
(patch_embed.proj, cls_token, pos_embed, blocks.N.*, norm), so a
published checkpoint file loads directly via load_checkpoint. For
offline testing, "random:<seed>" builds a deterministically initialized
model.
"""

import math

import torch
import torch.nn as nn

PATCH_SIZE = 16
EMBED_DIM = 384
DEPTH = 12
NUM_HEADS = 6
MLP_RATIO = 4.0

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class Attention(nn.Module):
    def __init__(self, dim, num_heads):
        super().__init__()
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3, bias=True)
        self.proj = nn.Linear(dim, dim)
        self.last_keys = None  # (B, N, dim), set on every forward

    def forward(self, x):
        b, n, c = x.shape
        qkv = (
            self.qkv(x)
            .reshape(b, n, 3, self.num_heads, c // self.num_heads)
            .permute(2, 0, 3, 1, 4)
        )
        q, k, v = qkv[0], qkv[1], qkv[2]
        self.last_keys = k.transpose(1, 2).reshape(b, n, c)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        x = (attn @ v).transpose(1, 2).reshape(b, n, c)
        return self.proj(x)


class Mlp(nn.Module):
    def __init__(self, dim, hidden):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    def __init__(self, dim, num_heads, mlp_ratio):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = Attention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        x = x + self.mlp(self.norm2(x))
        return x


class VisionTransformer(nn.Module):
    def __init__(
        self,
        patch_size=PATCH_SIZE,
        embed_dim=EMBED_DIM,
        depth=DEPTH,
        num_heads=NUM_HEADS,
        mlp_ratio=MLP_RATIO,
    ):
        super().__init__()
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.patch_embed = nn.Conv2d(3, embed_dim, patch_size, stride=patch_size)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, embed_dim))
        self.pos_embed = nn.Parameter(torch.zeros(1, 1 + 14 * 14, embed_dim))
        self.blocks = nn.ModuleList(
            [Block(embed_dim, num_heads, mlp_ratio) for _ in range(depth)]
        )
        self.norm = nn.LayerNorm(embed_dim, eps=1e-6)
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        nn.init.trunc_normal_(self.cls_token, std=0.02)

    def interpolate_pos_embed(self, h_patches, w_patches):
        n_ref = self.pos_embed.shape[1] - 1
        side = int(math.sqrt(n_ref))
        if h_patches * w_patches == n_ref and h_patches == w_patches:
            return self.pos_embed
        cls_pos = self.pos_embed[:, :1]
        grid = self.pos_embed[:, 1:].reshape(1, side, side, self.embed_dim)
        grid = grid.permute(0, 3, 1, 2)
        grid = nn.functional.interpolate(
            grid, size=(h_patches, w_patches), mode="bicubic", align_corners=False
        )
        grid = grid.permute(0, 2, 3, 1).reshape(1, h_patches * w_patches, self.embed_dim)
        return torch.cat([cls_pos, grid], dim=1)

    def forward_tokens(self, pixels):
        """pixels: (B, 3, H, W) with H, W multiples of the patch size.

        Returns (cls, keys) where cls is the final-norm CLS embedding
        (B, dim) and keys are the last attention layer's key vectors per
        patch (B, h_patches, w_patches, dim).
        """
        b, _, h, w = pixels.shape
        if h % self.patch_size or w % self.patch_size:
            raise ValueError("input dims must be multiples of the patch size")
        hp, wp = h // self.patch_size, w // self.patch_size
        x = self.patch_embed(pixels).flatten(2).transpose(1, 2)
        cls = self.cls_token.expand(b, -1, -1)
        x = torch.cat([cls, x], dim=1)
        x = x + self.interpolate_pos_embed(hp, wp)
        for block in self.blocks:
            x = block(x)
        keys = self.blocks[-1].attn.last_keys[:, 1:]  # drop the CLS position
        x = self.norm(x)
        return x[:, 0], keys.reshape(b, hp, wp, self.embed_dim)


def load_checkpoint(checkpoint: str) -> VisionTransformer:
    """Build the backbone from a checkpoint file path or "random:<seed>".

    The random variant keeps the standard module initialization (seeded),
    giving content-dependent features for offline tests.
    """
    if checkpoint.startswith("random:"):
        torch.manual_seed(int(checkpoint.split(":", 1)[1]))
        model = VisionTransformer()
        model.eval()
        return model
    model = VisionTransformer()
    state = torch.load(checkpoint, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    state = {k.replace("module.", ""): v for k, v in state.items()}
    missing, _ = model.load_state_dict(state, strict=False)
    if missing:
        raise ValueError(f"checkpoint missing keys: {missing[:5]}")
    model.eval()
    return model


def preprocess(rgb01: torch.Tensor) -> torch.Tensor:
    """Normalize (B, 3, H, W) float tensors in [0, 1]."""
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    return (rgb01 - mean) / std
