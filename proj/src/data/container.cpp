// Copyright 2026 The capsyolo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "data/container.hpp"

#include <filesystem>
#include <memory>

#include <hdf5.h>

#include "common/errors.hpp"

namespace capsyolo::data {

namespace {

// Scoped HDF5 identifier.
class H5Id {
public:
    H5Id(hid_t id, herr_t (*close)(hid_t), const std::string& what) : id_(id), close_(close)
    {
        if (id_ < 0) throw IoError("hdf5: " + what);
    }
    H5Id(const H5Id&) = delete;
    H5Id& operator=(const H5Id&) = delete;
    ~H5Id()
    {
        if (id_ >= 0) close_(id_);
    }
    operator hid_t() const { return id_; }

private:
    hid_t id_;
    herr_t (*close_)(hid_t);
};

void check(herr_t rc, const std::string& what)
{
    if (rc < 0) throw IoError("hdf5: " + what);
}

void silence_hdf5()
{
    static bool done = [] {
        H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
        return true;
    }();
    (void)done;
}

void write_array(hid_t parent, const std::string& name, hid_t mem_type, hid_t file_type, const std::vector<hsize_t>& dims,
                 const void* data, bool compress)
{
    H5Id space(H5Screate_simple(static_cast<int>(dims.size()), dims.data(), nullptr), H5Sclose, "dataspace " + name);
    H5Id plist(H5Pcreate(H5P_DATASET_CREATE), H5Pclose, "plist " + name);
    hsize_t total = 1;
    for (auto d : dims) total *= d;
    if (compress && total > 0) {
        std::vector<hsize_t> chunk = dims;
        chunk[0] = 1;
        check(H5Pset_chunk(plist, static_cast<int>(chunk.size()), chunk.data()), "chunk " + name);
        check(H5Pset_deflate(plist, 4), "deflate " + name);
    }
    H5Id ds(H5Dcreate2(parent, name.c_str(), file_type, space, H5P_DEFAULT, plist, H5P_DEFAULT), H5Dclose,
            "create " + name);
    if (total > 0) check(H5Dwrite(ds, mem_type, H5S_ALL, H5S_ALL, H5P_DEFAULT, data), "write " + name);
}

void write_strings(hid_t parent, const std::string& name, const std::vector<std::string>& values)
{
    H5Id type(H5Tcopy(H5T_C_S1), H5Tclose, "string type");
    check(H5Tset_size(type, H5T_VARIABLE), "string size");
    check(H5Tset_cset(type, H5T_CSET_UTF8), "string cset");
    std::vector<const char*> ptrs;
    for (const auto& v : values) ptrs.push_back(v.c_str());
    write_array(parent, name, type, type, {values.size()}, ptrs.data(), false);
}

std::vector<hsize_t> dims_of(hid_t ds)
{
    H5Id space(H5Dget_space(ds), H5Sclose, "dataspace");
    const int rank = H5Sget_simple_extent_ndims(space);
    if (rank < 0) throw IoError("hdf5: rank");
    std::vector<hsize_t> d(static_cast<std::size_t>(rank));
    H5Sget_simple_extent_dims(space, d.data(), nullptr);
    return d;
}

template <typename T>
std::vector<T> read_array(hid_t parent, const std::string& name, hid_t mem_type, std::vector<hsize_t>* dims_out)
{
    H5Id ds(H5Dopen2(parent, name.c_str(), H5P_DEFAULT), H5Dclose, "missing dataset " + name);
    auto dims = dims_of(ds);
    hsize_t total = 1;
    for (auto d : dims) total *= d;
    std::vector<T> out(total);
    if (total > 0) check(H5Dread(ds, mem_type, H5S_ALL, H5S_ALL, H5P_DEFAULT, out.data()), "read " + name);
    if (dims_out) *dims_out = dims;
    return out;
}

std::vector<std::string> read_strings(hid_t parent, const std::string& name)
{
    H5Id ds(H5Dopen2(parent, name.c_str(), H5P_DEFAULT), H5Dclose, "missing dataset " + name);
    auto dims = dims_of(ds);
    if (dims.size() != 1) throw IoError("hdf5: " + name + " is not a string list");
    H5Id type(H5Tcopy(H5T_C_S1), H5Tclose, "string type");
    check(H5Tset_size(type, H5T_VARIABLE), "string size");
    check(H5Tset_cset(type, H5T_CSET_UTF8), "string cset");
    std::vector<char*> ptrs(dims[0], nullptr);
    if (dims[0] == 0) return {};
    check(H5Dread(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, ptrs.data()), "read " + name);
    std::vector<std::string> out;
    for (char* p : ptrs) out.emplace_back(p ? p : "");
    H5Id space(H5Dget_space(ds), H5Sclose, "dataspace");
    H5Dvlen_reclaim(type, space, H5P_DEFAULT, ptrs.data());
    return out;
}

template <typename T>
void write_attr(hid_t obj, const std::string& name, hid_t type, T value)
{
    H5Id space(H5Screate(H5S_SCALAR), H5Sclose, "scalar space");
    H5Id attr(H5Acreate2(obj, name.c_str(), type, space, H5P_DEFAULT, H5P_DEFAULT), H5Aclose, "attr " + name);
    check(H5Awrite(attr, type, &value), "write attr " + name);
}

template <typename T>
T read_attr(hid_t obj, const std::string& name, hid_t type)
{
    H5Id attr(H5Aopen(obj, name.c_str(), H5P_DEFAULT), H5Aclose, "missing attribute " + name);
    T value{};
    check(H5Aread(attr, type, &value), "read attr " + name);
    return value;
}

}  // namespace

std::span<const std::uint8_t> Dataset::pixels(std::size_t i) const
{
    const std::size_t n = height * width * 3;
    if (i >= size()) throw ContractError("dataset index out of range");
    return {images.data() + i * n, n};
}

ad::Tensor Dataset::image(std::size_t i) const
{
    return to_tensor(pixels(i), height, width);
}

yolo::BBox Dataset::box(std::size_t i) const
{
    if (i >= size()) throw ContractError("dataset index out of range");
    return {boxes[i * 4], boxes[i * 4 + 1], boxes[i * 4 + 2], boxes[i * 4 + 3]};
}

std::vector<std::size_t> Dataset::indices(bool train) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
        if ((train_mask[i] != 0) == train) out.push_back(i);
    return out;
}

void Dataset::check() const
{
    const std::size_t n = labels.size();
    auto fail = [](const std::string& what) { throw ValidationError("dataset: " + what); };
    if (images.size() != n * height * width * 3) fail("/images leading dimension differs from /labels");
    if (train_mask.size() != n) fail("split mask length differs from /labels");
    if (boxes.size() != n * 4) fail("/boxes leading dimension differs from /labels");
    for (const auto* v : {&file_ids, &sources, &severity, &plant_part})
        if (v->size() != n) fail("metadata list length differs from /labels");
    for (auto l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= class_names.size()) fail("label out of range");
}

Dataset assemble(const DatasetManifest& manifest, std::size_t height, std::size_t width)
{
    if (height == 0 || width == 0) throw ContractError("assemble: image size must be positive");
    Dataset ds;
    ds.height = height;
    ds.width = width;
    ds.class_names = manifest.classes;
    ds.seed = manifest.seed;
    ds.images.reserve(manifest.entries.size() * height * width * 3);
    for (const auto& e : manifest.entries) {
        if (e.label >= manifest.classes.size()) throw ValidationError("manifest label out of range: " + e.file_id);
        RgbImage img;
        try {
            img = resize_rgb(read_rgb(e.path), height, width);
        } catch (const BadInputError&) {
            throw ValidationError("manifest image no longer decodes: " + e.path);
        } catch (const IoError&) {
            throw ValidationError("manifest image missing: " + e.path);
        }
        ds.images.insert(ds.images.end(), img.pixels.begin(), img.pixels.end());
        ds.labels.push_back(static_cast<std::int32_t>(e.label));
        ds.boxes.insert(ds.boxes.end(), {e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max});
        ds.train_mask.push_back(e.train ? 1 : 0);
        ds.file_ids.push_back(e.file_id);
        ds.sources.push_back(e.source);
        ds.severity.push_back(e.severity);
        ds.plant_part.push_back(e.plant_part);
    }
    return ds;
}

void write_container(const Dataset& ds, const std::string& path)
{
    ds.check();
    silence_hdf5();
    const std::string tmp = path + ".tmp";
    {
        H5Id file(H5Fcreate(tmp.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose, "cannot create " + path);
        write_attr<std::uint32_t>(file, "format_version", H5T_NATIVE_UINT32, kContainerVersion);

        const hsize_t n = ds.size();
        write_array(file, "images", H5T_NATIVE_UINT8, H5T_STD_U8LE, {n, ds.height, ds.width, 3}, ds.images.data(), true);
        {
            H5Id images(H5Dopen2(file, "images", H5P_DEFAULT), H5Dclose, "reopen images");
            write_attr<double>(images, "scale", H5T_NATIVE_DOUBLE, 1.0 / 255.0);
        }
        write_array(file, "labels", H5T_NATIVE_INT32, H5T_STD_I32LE, {n}, ds.labels.data(), false);
        write_array(file, "boxes", H5T_NATIVE_DOUBLE, H5T_IEEE_F64LE, {n, 4}, ds.boxes.data(), false);

        H5Id meta(H5Gcreate2(file, "meta", H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT), H5Gclose, "create /meta");
        write_attr<std::uint64_t>(meta, "seed", H5T_NATIVE_UINT64, ds.seed);
        write_strings(meta, "class_names", ds.class_names);
        write_strings(meta, "file_ids", ds.file_ids);
        write_strings(meta, "sources", ds.sources);
        write_strings(meta, "severity", ds.severity);
        write_strings(meta, "plant_part", ds.plant_part);
        write_array(meta, "train_mask", H5T_NATIVE_UINT8, H5T_STD_U8LE, {n}, ds.train_mask.data(), false);
        check(H5Fflush(file, H5F_SCOPE_GLOBAL), "flush " + path);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move container into place at " + path + ": " + ec.message());
}

Dataset read_container(const std::string& path)
{
    silence_hdf5();
    if (!std::filesystem::exists(path)) throw IoError("container not found: " + path);
    if (H5Fis_hdf5(path.c_str()) <= 0) throw IoError("not a dataset container: " + path);
    H5Id file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose, "cannot open " + path);
    const auto version = read_attr<std::uint32_t>(file, "format_version", H5T_NATIVE_UINT32);
    if (version != kContainerVersion) {
        throw IoError("container format version " + std::to_string(version) + " is not supported");
    }

    Dataset ds;
    std::vector<hsize_t> dims;
    ds.images = read_array<std::uint8_t>(file, "images", H5T_NATIVE_UINT8, &dims);
    if (dims.size() != 4 || dims[3] != 3) throw ValidationError("/images must be [N,H,W,3]");
    ds.height = dims[1];
    ds.width = dims[2];
    ds.labels = read_array<std::int32_t>(file, "labels", H5T_NATIVE_INT32, nullptr);
    ds.boxes = read_array<double>(file, "boxes", H5T_NATIVE_DOUBLE, nullptr);

    H5Id meta(H5Gopen2(file, "meta", H5P_DEFAULT), H5Gclose, "missing /meta");
    ds.seed = read_attr<std::uint64_t>(meta, "seed", H5T_NATIVE_UINT64);
    ds.class_names = read_strings(meta, "class_names");
    ds.file_ids = read_strings(meta, "file_ids");
    ds.sources = read_strings(meta, "sources");
    ds.severity = read_strings(meta, "severity");
    ds.plant_part = read_strings(meta, "plant_part");
    ds.train_mask = read_array<std::uint8_t>(meta, "train_mask", H5T_NATIVE_UINT8, nullptr);
    if (dims[0] != ds.labels.size()) throw ValidationError("/images and /labels leading dimensions differ");
    ds.check();
    return ds;
}

}  // namespace capsyolo::data
