#pragma once

#include "beads/error.hpp"
#include "beads/text.hpp"
#include "beads/schema.hpp"
#include "beads/corpus.hpp"
#include "beads/annotation.hpp"
#include "beads/autotag.hpp"
#include "beads/http_client.hpp"
#include "beads/agreement.hpp"
#include "beads/analytics.hpp"
#include "beads/store.hpp"
#include "beads/service.hpp"
