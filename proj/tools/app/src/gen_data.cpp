#include "ivqravg/app/gen_data.hpp"

#include "ivqravg/errors.hpp"
#include "ivqravg/rng.hpp"

namespace ivqr::app {

namespace {

void append(CsvTable& table, const std::string& name, const Eigen::Ref<const Vector>& values)
{
  table.header.push_back(name);
  table.columns.emplace_back(values.data(), values.data() + values.size());
}

} // namespace

SimulatedData generate_dataset(const GenDataOptions& options)
{
  const QuantileLevel tau(options.tau);
  Engine rng = keyed_engine({options.seed, 0, 0, 0});
  switch (options.model) {
    case 1:
      options.m1.validate();
      return gen_model1(options.m1, options.n, tau, rng);
    case 2:
      options.m2.validate();
      return gen_model2(options.m2, options.n, tau, rng);
    case 3:
      options.m3.validate();
      return gen_model3(options.m3, options.n, tau, rng);
    default:
      throw InvalidArgument("model must be 1, 2 or 3");
  }
}

CsvTable dataset_table(const Dataset& data)
{
  CsvTable table;
  append(table, "y", data.y());
  for (Index j = 0; j < data.d_endog(); ++j) append(table, "d" + std::to_string(j + 1), data.endog().col(j));
  const Index first = data.has_intercept() ? 1 : 0;
  for (Index j = first; j < data.d_exog(); ++j) {
    append(table, "x" + std::to_string(j - first + 1), data.x_exog().col(j));
  }
  for (Index j = 0; j < data.d_excl(); ++j) append(table, "z" + std::to_string(j + 1), data.z_excl().col(j));
  return table;
}

} // namespace ivqr::app
