#ifndef TARD_NN_HPP
#define TARD_NN_HPP

#include "tard/nn/adam.hpp"
#include "tard/nn/dense.hpp"
#include "tard/nn/gradcheck.hpp"
#include "tard/nn/layers.hpp"
#include "tard/nn/losses.hpp"

#endif // TARD_NN_HPP
