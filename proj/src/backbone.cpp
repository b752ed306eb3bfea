#include "saratrx/backbone.hpp"

namespace saratrx::backbone {

Variant variant_from_string(const std::string& s) {
    if (s == "hivit") return Variant::HiViT;
    if (s == "vit") return Variant::ViT;
    throw ValidationError("unknown encoder variant: " + s);
}

std::string to_string(Variant v) {
    return v == Variant::HiViT ? "hivit" : "vit";
}

void EncoderConfig::validate() const {
    if (patch_size != 4) throw ValidationError("encoder: patch_size must be 4");
    if (input_size < 16 || input_size % 16 != 0)
        throw ValidationError("encoder: input_size must be a positive multiple of 16");
    if (dim3 % heads != 0) throw ValidationError("encoder: dim3 must be divisible by heads");
    if (dim1 < 1 || dim2 < 1 || dim3 < 1 || depth3 < 1)
        throw ValidationError("encoder: dims and depth3 must be positive");
    if (variant == Variant::HiViT && (depth1 < 1 || depth2 < 1))
        throw ValidationError("encoder: hivit needs depth1, depth2 >= 1");
    if (mlp_ratio <= 0.0) throw ValidationError("encoder: mlp_ratio must be > 0");
}

}  // namespace saratrx::backbone
