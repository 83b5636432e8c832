#pragma once

#include <filesystem>
#include <fstream>
#include <string>

namespace testutil {

/// Fresh scratch directory under the test working directory.
inline std::filesystem::path make_temp_dir(const std::string& name) {
    const auto dir = std::filesystem::path("test_tmp") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

/// Minimal six-file dataset: 3 streets, 6 blocks, 8 mains, a handful of
/// work orders. Streets run horizontally at y = 0, 200, 400; each street
/// has two 300 ft blocks.
inline void write_fixture_city(const std::filesystem::path& dir) {
    write_text(dir / "blocks.csv",
               "block_id,street_id,label,geometry,soil_type,rock_type,pressure_zone\n"
               "1,1,\"Elm St, 0-99\",0 0;300 0,clay,shale,Z1\n"
               "2,1,\"Elm St, 100-199\",300 0;600 0,clay,shale,Z1\n"
               "3,2,\"Oak Ave, 0-99\",0 200;300 200,loam,shale,Z1\n"
               "4,2,\"Oak Ave, 100-199\",300 200;600 200,loam,limestone,Z2\n"
               "5,3,\"Pine Rd, 0-99\",0 400;300 400,sand,limestone,Z2\n"
               "6,3,\"Pine Rd, 100-199\",300 400;600 400,sand,limestone,Z2\n");
    write_text(dir / "mains.csv",
               "main_id,geometry,diameter_in,material,install_year\n"
               "M1,0 5;150 5,8,cast_iron,1920\n"
               "M2,150 5;300 5,6,cast_iron,1950\n"
               "M3,300 5;600 5,,,\n"
               "M4,0 205;300 205,10,ductile_iron,1970\n"
               "M5,300 205;600 205,,,\n"
               "M6,0 405;300 405,,,\n"
               "M7,300 405;450 405,,,\n"
               "M8,450 405;600 405,,,\n");
    write_text(dir / "work_orders.csv",
               "event_id,date,description,main_id,x,y\n"
               "WO1,2006-03-10,Main Break/Leak,,120,6\n"
               "WO2,2009-07-21,Main Break/Leak,M1,,\n"
               "WO3,2011-11-02,Main Break/Leak,,430,204\n"
               "WO4,2012-01-15,Hydrant Flush,,20,398\n"
               "WO5,2013-05-05,Main Break/Leak,,80,402\n"
               "WO6,2014-09-09,Main Break/Leak,,310,3\n");
    write_text(dir / "road_ratings.csv",
               "block_id,year,rating\n"
               "1,2006,7\n"
               "1,2010,5\n"
               "2,2010,8\n"
               "3,2008,0\n"
               "4,2012,3\n"
               "5,2010,9\n");
    write_text(dir / "parcels.csv",
               "block_id,first_tax_year\n"
               "2,1931\n"
               "3,1972\n"
               "5,1955\n"
               "6,1958\n");
    write_text(dir / "notebook.csv",
               "street_id,material,diameter_in\n"
               "3,universal,6\n");
}

}  // namespace testutil
