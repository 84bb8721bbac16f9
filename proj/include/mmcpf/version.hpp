#pragma once

namespace mmcpf {
inline constexpr const char* kVersion = "0.1.0";
}
