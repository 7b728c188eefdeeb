#pragma once

#define TVVI_VERSION "0.1.0"
